#include <cmath>

#include "podstore/bench.hpp"
#include "podstore/error.hpp"

namespace podstore {

namespace {

std::uint64_t below(std::mt19937_64& rng, std::uint64_t n) { return n == 0 ? 0 : rng() % n; }

// Uniform in [0, 1) from the top 53 bits.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Bytes fill(std::mt19937_64& rng, std::size_t n) {
  Bytes b(n);
  for (auto& x : b) x = static_cast<std::uint8_t>(rng());
  return b;
}

}  // namespace

ObjectGraph random_graph(std::mt19937_64& rng, const GraphGenOptions& o) {
  ObjectGraph g;
  std::size_t n = 1;
  if (o.max_nodes > 1) {
    if (o.log_uniform_size) {
      n = static_cast<std::size_t>(std::exp(unit(rng) * std::log(static_cast<double>(o.max_nodes))));
    } else {
      n = 1 + below(rng, o.max_nodes);
    }
    n = std::clamp<std::size_t>(n, 1, o.max_nodes);
  }

  std::vector<ObjectId> ids;
  std::vector<std::vector<ObjectId>> kids;
  std::vector<std::size_t> containers;
  std::vector<Bytes> payloads;
  std::vector<std::size_t> roots;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool container = i == 0 || unit(rng) < o.container_prob;
    Bytes payload;
    if (!payloads.empty() && unit(rng) < o.duplicate_payload_prob) {
      payload = payloads[below(rng, payloads.size())];
    } else {
      payload = fill(rng, below(rng, o.max_payload + 1));
    }
    payloads.push_back(payload);
    ids.push_back(g.create(container ? ObjectKind::kContainer : ObjectKind::kLeaf, std::move(payload)));
    kids.emplace_back();
    if (i == 0 || containers.empty() || unit(rng) < o.new_root_prob) {
      roots.push_back(i);
    } else {
      kids[containers[below(rng, containers.size())]].push_back(ids[i]);
    }
    if (container) containers.push_back(i);
  }
  for (std::size_t c : containers) {
    while (unit(rng) < o.extra_edge_prob) kids[c].push_back(ids[below(rng, n)]);
  }
  for (std::size_t c : containers) g.set_children(ids[c], std::move(kids[c]));

  std::size_t v = 0;
  for (std::size_t r : roots) g.bind("v" + std::to_string(v++), ids[r]);
  while (unit(rng) < o.alias_prob) g.bind("v" + std::to_string(v++), ids[below(rng, n)]);
  return g;
}

TreeInstance random_tree_instance(std::mt19937_64& rng, std::size_t decisions,
                                  const TreeGenOptions& o) {
  if (decisions == 0) throw Error(ErrorCode::kInvalidArgument, "instance needs a decision");
  // Node 0 is the namespace root; parent[i] < i.
  std::vector<std::size_t> parent(decisions + 1, 0);
  std::vector<std::size_t> child_count(decisions + 1, 0);
  for (std::size_t i = 1; i <= decisions; ++i) {
    parent[i] = below(rng, i);
    ++child_count[parent[i]];
  }

  TreeInstance inst;
  std::vector<ObjectId> ids(decisions + 1);
  const double lo = std::log(o.min_size);
  const double hi = std::log(o.max_size);
  for (std::size_t i = 1; i <= decisions; ++i) {
    const double target = std::exp(lo + unit(rng) * (hi - lo));
    const double fixed = 16.0 + 8.0 * static_cast<double>(child_count[i]);
    const auto payload = static_cast<std::size_t>(std::max(0.0, std::round(target - fixed)));
    const ObjectKind kind = child_count[i] > 0 ? ObjectKind::kContainer : ObjectKind::kLeaf;
    ids[i] = inst.graph.create(kind, fill(rng, payload));
    const double lambda = unit(rng) < o.zero_volatility_prob ? 0.0 : unit(rng);
    inst.volatility.emplace(ids[i], lambda);
  }
  std::vector<std::vector<ObjectId>> kids(decisions + 1);
  for (std::size_t i = 1; i <= decisions; ++i) kids[parent[i]].push_back(ids[i]);
  for (std::size_t i = 1; i <= decisions; ++i) {
    if (!kids[i].empty()) inst.graph.set_children(ids[i], std::move(kids[i]));
  }
  std::size_t v = 0;
  for (ObjectId top : kids[0]) {
    // Names sort in creation order so the root's child order is stable.
    char name[16];
    std::snprintf(name, sizeof name, "v%03zu", v++);
    inst.graph.bind(name, top);
    inst.names.insert(name);
  }
  return inst;
}

OptimalityResult compare_to_optimal(const TreeInstance& inst, const CostParams& params) {
  auto estimator = std::make_shared<TableVolatility>(inst.volatility, 0.0);
  const FirstVisitTree tree = first_visit_tree(inst.graph, inst.names, *estimator);

  OptimalityResult r;
  r.decisions = tree.decisions();
  r.optimal = exhaustive_optimal(tree, params, 64).cost;
  r.split_all = split_all_cost(tree, params);
  r.alpha = approximation_alpha(tree, params);

  LearnedGreedy lga(params, estimator, std::make_shared<DecisionMemo>());
  GlobalPageAllocator pages;
  PodSaveResult saved = pod_save(inst.graph, inst.names, lga, pages);

  std::unordered_map<ObjectId, std::size_t, ObjectIdHash> index;
  for (std::size_t i = 0; i < tree.ids.size(); ++i) index.emplace(tree.ids[i], i);
  std::vector<PodMembers> partition;
  for (const Pod& pod : saved.pods) {
    PodMembers members;
    for (ObjectId id : pod.members) members.push_back(index.at(id));
    partition.push_back(std::move(members));
  }
  r.lga = expected_cost(partition, tree.sizes, tree.volatilities, params);
  return r;
}

std::uint64_t namespace_bytes(const ObjectGraph& ns) {
  if (ns.variables().empty()) return 0;
  NameSet names;
  for (const auto& [name, id] : ns.variables()) names.insert(name);
  BundleAll bundle;
  GlobalPageAllocator pages;
  return pod_save(ns, names, bundle, pages).pods.front().bytes.size();
}

std::shared_ptr<PoddingOptimizer> make_strategy(const std::string& name, const CostParams& params,
                                                std::uint64_t seed, const ObjectGraph& graph,
                                                const NameSet& names) {
  if (name == "bundle-all") return std::make_shared<BundleAll>();
  if (name == "split-all") return std::make_shared<SplitAll>();
  if (name == "random") return std::make_shared<RandomActions>(seed);
  if (name == "tbh") return std::make_shared<TypeBasedHeuristic>(default_type_catalog());
  auto memo = std::make_shared<DecisionMemo>();
  if (name == "lga") {
    return std::make_shared<LearnedGreedy>(params, std::make_shared<FeatureHeuristic>(), memo);
  }
  if (name == "lga-0") {
    return std::make_shared<LearnedGreedy>(params, std::make_shared<ConstantVolatility>(0.0), memo,
                                           "lga-0");
  }
  if (name == "lga-1") {
    return std::make_shared<LearnedGreedy>(params, std::make_shared<ConstantVolatility>(1.0), memo,
                                           "lga-1");
  }
  if (name == "exhaustive") return plan_exhaustive(graph, names, FeatureHeuristic{}, params);
  throw Error(ErrorCode::kInvalidArgument, "unknown strategy '" + name + "'");
}

}  // namespace podstore
