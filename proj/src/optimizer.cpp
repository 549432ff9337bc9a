#include "podstore/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "podstore/error.hpp"

namespace podstore {

std::string_view action_name(PoddingAction action) {
  switch (action) {
    case PoddingAction::kBundle: return "bundle";
    case PoddingAction::kSplitContinue: return "split-continue";
    case PoddingAction::kSplitFinal: return "split-final";
  }
  return "?";
}

PoddingAction parse_action(std::string_view text) {
  if (text == "bundle") return PoddingAction::kBundle;
  if (text == "split-continue") return PoddingAction::kSplitContinue;
  if (text == "split-final") return PoddingAction::kSplitFinal;
  throw Error(ErrorCode::kParseError, "unknown podding action '" + std::string(text) + "'");
}

ObjectFeatures features_of(const ObjectNode& node) {
  return {node.id, node.kind, object_size(node), node.children.size(), node.payload.size()};
}

const PoddingAction* DecisionMemo::find(ObjectId id) const {
  auto it = actions_.find(id);
  return it == actions_.end() ? nullptr : &it->second;
}

void DecisionMemo::record(ObjectId id, PoddingAction action) {
  actions_.try_emplace(id, action);
}

double expected_cost(const std::vector<PodMembers>& partition,
                     std::span<const double> sizes,
                     std::span<const double> volatilities,
                     const CostParams& params) {
  std::unordered_set<std::size_t> seen;
  double total = 0.0;
  for (const auto& pod : partition) {
    double s = 0.0, l = 0.0;
    for (std::size_t i : pod) {
      if (!seen.insert(i).second) {
        throw Error(ErrorCode::kOverlappingPods,
                    "object index " + std::to_string(i) + " is in two pods");
      }
      if (i >= sizes.size() || i >= volatilities.size()) {
        throw Error(ErrorCode::kInvalidArgument, "object index out of range");
      }
      s += sizes[i];
      l += volatilities[i];
    }
    total += params.c_pod + s * l;
  }
  return total;
}

double delta_bundle(const PodStats& pod, double size, double volatility) {
  return pod.size * volatility + size * (pod.volatility + volatility);
}

double delta_split(double size, double volatility, const CostParams& params) {
  return params.c_pod + size * volatility;
}

PoddingAction lga_action(ObjectId id, const PodStats& pod, const CostParams& params,
                         double size, double volatility, DecisionMemo* memo) {
  if (memo != nullptr) {
    if (const PoddingAction* known = memo->find(id)) return *known;
  }
  PoddingAction action;
  if (delta_bundle(pod, size, volatility) < delta_split(size, volatility, params)) {
    action = PoddingAction::kBundle;
  } else if (pod.depth < params.max_pod_depth) {
    action = PoddingAction::kSplitContinue;
  } else {
    action = PoddingAction::kSplitFinal;
  }
  if (memo != nullptr) memo->record(id, action);
  return action;
}

// --- estimators ------------------------------------------------------------

ConstantVolatility::ConstantVolatility(double rate) : rate_(std::clamp(rate, 0.0, 1.0)) {}

std::string ConstantVolatility::name() const {
  std::ostringstream os;
  os << "constant(" << rate_ << ")";
  return os.str();
}

double FeatureHeuristic::estimate(const ObjectFeatures& object) const {
  if (weights_.immutable_leaves && object.kind == ObjectKind::kLeaf) return 0.0;
  double v = weights_.w0 + weights_.w1 * std::log1p(static_cast<double>(object.size)) +
             weights_.w2 * std::log1p(static_cast<double>(object.child_count));
  return std::clamp(v, 0.0, 1.0);
}

double EmpiricalFrequency::estimate(const ObjectFeatures& object) const {
  History h;
  if (auto it = history_.find(object.id); it != history_.end()) h = it->second;
  return (h.changes + 1.0) / (h.checkpoints + 2.0);
}

void EmpiricalFrequency::observe(ObjectId id, bool pod_changed) {
  History& h = history_[id];
  ++h.checkpoints;
  if (pod_changed) ++h.changes;
}

double TableVolatility::estimate(const ObjectFeatures& object) const {
  auto it = table_.find(object.id);
  return std::clamp(it == table_.end() ? fallback_ : it->second, 0.0, 1.0);
}

// --- strategies ------------------------------------------------------------

PoddingAction RandomActions::decide(const ObjectFeatures&, double, const PodStats&) {
  return static_cast<PoddingAction>(rng_() % 3);
}

TypeCatalog parse_type_catalog(std::string_view text) {
  TypeCatalog catalog;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::string kind, action, extra;
    if (!(fields >> kind)) continue;
    if (!(fields >> action) || (fields >> extra)) {
      throw Error(ErrorCode::kParseError,
                  "catalog line " + std::to_string(line_no) + ": expected '<kind> <action>'");
    }
    ObjectKind k;
    if (kind == "leaf") {
      k = ObjectKind::kLeaf;
    } else if (kind == "container") {
      k = ObjectKind::kContainer;
    } else {
      throw Error(ErrorCode::kParseError,
                  "catalog line " + std::to_string(line_no) + ": unknown kind '" + kind + "'");
    }
    catalog[k] = parse_action(action);
  }
  return catalog;
}

TypeCatalog default_type_catalog() {
  // Compositional objects mutate independently of their parents; everything
  // else rides along with its parent.
  return {{ObjectKind::kContainer, PoddingAction::kSplitContinue}};
}

PoddingAction TypeBasedHeuristic::decide(const ObjectFeatures& object, double,
                                         const PodStats&) {
  auto it = catalog_.find(object.kind);
  return it == catalog_.end() ? PoddingAction::kBundle : it->second;
}

LearnedGreedy::LearnedGreedy(CostParams params, std::shared_ptr<VolatilityEstimator> estimator,
                             std::shared_ptr<DecisionMemo> memo, std::string label)
    : params_(params),
      estimator_(std::move(estimator)),
      memo_(std::move(memo)),
      label_(std::move(label)) {
  if (!(params_.c_pod > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "c_pod must be positive");
  }
  if (params_.max_pod_depth < 1) {
    throw Error(ErrorCode::kInvalidArgument, "max_pod_depth must be positive");
  }
}

PoddingAction LearnedGreedy::decide(const ObjectFeatures& object, double volatility,
                                    const PodStats& current_pod) {
  return lga_action(object.id, current_pod, params_, static_cast<double>(object.size),
                    volatility, memo_.get());
}

double LearnedGreedy::volatility(const ObjectFeatures& object) const {
  return estimator_->estimate(object);
}

// --- exhaustive ------------------------------------------------------------

FirstVisitTree first_visit_tree(const ObjectGraph& graph, const NameSet& names,
                                const VolatilityEstimator& estimator) {
  FirstVisitTree tree;
  std::unordered_map<ObjectId, int, ObjectIdHash> index;

  ObjectNode root{graph.root(), ObjectKind::kContainer, {}, {}};
  std::vector<std::string> name_list(names.begin(), names.end());
  root.payload = encode_name_list(name_list);
  for (const auto& n : name_list) root.children.push_back(graph.lookup(n));

  auto add = [&](const ObjectNode& node, int parent) {
    int idx = static_cast<int>(tree.parent.size());
    index.emplace(node.id, idx);
    tree.parent.push_back(parent);
    tree.sizes.push_back(static_cast<double>(object_size(node)));
    tree.volatilities.push_back(estimator.estimate(features_of(node)));
    tree.ids.push_back(node.id);
    return idx;
  };

  struct Frame {
    const ObjectNode* node;
    int idx;
    std::size_t next = 0;
  };
  std::vector<Frame> stack;
  stack.push_back({&root, add(root, -1)});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next == f.node->children.size()) {
      stack.pop_back();
      continue;
    }
    ObjectId child = f.node->children[f.next++];
    if (index.contains(child)) continue;
    const ObjectNode& c = graph.node(child);
    int parent_idx = f.idx;
    stack.push_back({&c, add(c, parent_idx)});
  }
  return tree;
}

namespace {

// Pod index for every node under a split mask (pods numbered by their head).
std::vector<int> pod_heads(const FirstVisitTree& tree, std::uint64_t split_mask) {
  std::vector<int> head(tree.parent.size());
  for (std::size_t i = 0; i < tree.parent.size(); ++i) {
    if (i == 0 || (split_mask >> (i - 1)) & 1U) {
      head[i] = static_cast<int>(i);
    } else {
      head[i] = head[static_cast<std::size_t>(tree.parent[i])];
    }
  }
  return head;
}

}  // namespace

std::vector<PodMembers> partition_from_splits(const FirstVisitTree& tree,
                                              std::uint64_t split_mask) {
  std::vector<int> head = pod_heads(tree, split_mask);
  std::map<int, PodMembers> pods;
  for (std::size_t i = 0; i < head.size(); ++i) pods[head[i]].push_back(i);
  std::vector<PodMembers> out;
  out.reserve(pods.size());
  for (auto& [h, members] : pods) out.push_back(std::move(members));
  return out;
}

double tree_cost(const FirstVisitTree& tree, std::uint64_t split_mask,
                 const CostParams& params) {
  const std::size_t n = tree.parent.size();
  std::vector<int> head(n);
  std::vector<double> s(n, 0.0), l(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0 || (split_mask >> (i - 1)) & 1U) {
      head[i] = static_cast<int>(i);
      total += params.c_pod;
    } else {
      head[i] = head[static_cast<std::size_t>(tree.parent[i])];
    }
    s[static_cast<std::size_t>(head[i])] += tree.sizes[i];
    l[static_cast<std::size_t>(head[i])] += tree.volatilities[i];
  }
  for (std::size_t i = 0; i < n; ++i) total += s[i] * l[i];
  return total;
}

ExhaustiveResult exhaustive_optimal(const FirstVisitTree& tree, const CostParams& params,
                                    std::size_t max_decisions) {
  const std::size_t d = tree.decisions();
  if (d > max_decisions || d >= 63) {
    throw Error(ErrorCode::kTooLarge, "exhaustive search over " + std::to_string(d) +
                                          " decisions exceeds the cap of " +
                                          std::to_string(max_decisions));
  }
  if (tree.parent.empty()) return {};
  ExhaustiveResult best;
  best.cost = std::numeric_limits<double>::infinity();
  const std::uint64_t limit = std::uint64_t{1} << d;
  for (std::uint64_t mask = 0; mask < limit; ++mask) {
    double c = tree_cost(tree, mask, params);
    if (c < best.cost) {
      best.cost = c;
      best.split_mask = mask;
    }
  }
  best.partition = partition_from_splits(tree, best.split_mask);
  return best;
}

double split_all_cost(const FirstVisitTree& tree, const CostParams& params) {
  double total = 0.0;
  for (std::size_t i = 0; i < tree.sizes.size(); ++i) {
    total += params.c_pod + tree.sizes[i] * tree.volatilities[i];
  }
  return total;
}

std::shared_ptr<PlannedActions> plan_exhaustive(const ObjectGraph& graph, const NameSet& names,
                                                const VolatilityEstimator& estimator,
                                                const CostParams& params,
                                                std::size_t max_decisions) {
  std::unordered_map<ObjectId, PoddingAction, ObjectIdHash> plan;
  if (!names.empty()) {
    const FirstVisitTree tree = first_visit_tree(graph, names, estimator);
    const ExhaustiveResult best = exhaustive_optimal(tree, params, max_decisions);
    for (std::size_t i = 1; i < tree.parent.size(); ++i) {
      const bool split = (best.split_mask >> (i - 1)) & 1U;
      plan.emplace(tree.ids[i], split ? PoddingAction::kSplitContinue : PoddingAction::kBundle);
    }
  }
  return std::make_shared<PlannedActions>(std::move(plan));
}

double approximation_alpha(const FirstVisitTree& tree, const CostParams& params) {
  const double n = static_cast<double>(tree.sizes.size());
  if (n == 0) return 0.0;
  double sum_sl = 0.0, sum_s = 0.0, sum_l = 0.0;
  for (std::size_t i = 0; i < tree.sizes.size(); ++i) {
    sum_sl += tree.sizes[i] * tree.volatilities[i];
    sum_s += tree.sizes[i];
    sum_l += tree.volatilities[i];
  }
  const double inf = std::numeric_limits<double>::infinity();
  const double gamma = sum_sl / n;
  const double mu_s = sum_s / n;
  const double mu_l = sum_l / n;
  double a = gamma > 0 ? params.c_pod / (2.0 * gamma) : inf;
  double b = (mu_s * mu_l) > 0 ? std::sqrt(params.c_pod / (16.0 * mu_s * mu_l)) : inf;
  return std::min(a, b);
}

}  // namespace podstore
