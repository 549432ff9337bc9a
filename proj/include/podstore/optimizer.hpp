#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "podstore/object_graph.hpp"

namespace podstore {

enum class PoddingAction : std::uint8_t { kBundle = 0, kSplitContinue = 1, kSplitFinal = 2 };

std::string_view action_name(PoddingAction action);
PoddingAction parse_action(std::string_view text);

struct CostParams {
  double c_pod = 1200.0;
  int max_pod_depth = 3;
};

// Running totals of the pod the traversal is currently filling.
struct PodStats {
  double size = 0.0;
  double volatility = 0.0;
  int depth = 0;
};

// What the optimizer may look at when deciding on one object.
struct ObjectFeatures {
  ObjectId id;
  ObjectKind kind = ObjectKind::kLeaf;
  std::uint64_t size = 0;
  std::size_t child_count = 0;
  std::size_t payload_length = 0;
};

ObjectFeatures features_of(const ObjectNode& node);

// Per-object action record that persists across saves of one session. Once an
// object has an action it keeps it.
class DecisionMemo {
 public:
  const PoddingAction* find(ObjectId id) const;
  void record(ObjectId id, PoddingAction action);
  // Forgets objects for which `alive` returns false. Ids are never reused, so
  // this cannot change a live object's action.
  template <typename Pred>
  void prune(Pred&& alive) {
    std::erase_if(actions_, [&](const auto& kv) { return !alive(kv.first); });
  }
  std::size_t size() const { return actions_.size(); }
  const std::unordered_map<ObjectId, PoddingAction, ObjectIdHash>& entries() const {
    return actions_;
  }

 private:
  std::unordered_map<ObjectId, PoddingAction, ObjectIdHash> actions_;
};

// ---------------------------------------------------------------------------
// Cost model

// One pod: indices into the size / volatility arrays.
using PodMembers = std::vector<std::size_t>;

// Sum over pods of c_pod + (sum of member sizes) * (sum of member volatilities).
// Throws OverlappingPods when an index appears twice.
double expected_cost(const std::vector<PodMembers>& partition,
                     std::span<const double> sizes,
                     std::span<const double> volatilities,
                     const CostParams& params);

double delta_bundle(const PodStats& pod, double size, double volatility);
double delta_split(double size, double volatility, const CostParams& params);

// Greedy decision for one object. A memoized action wins; otherwise bundle iff
// delta_bundle < delta_split, else split-continue while the current pod is
// shallower than max_pod_depth, else split-final. The result is memoized.
PoddingAction lga_action(ObjectId id, const PodStats& pod, const CostParams& params,
                         double size, double volatility, DecisionMemo* memo);

// ---------------------------------------------------------------------------
// Volatility estimators

class VolatilityEstimator {
 public:
  virtual ~VolatilityEstimator() = default;
  // Returns a rate in [0, 1].
  virtual double estimate(const ObjectFeatures& object) const = 0;
  // Called after each save with every podded object and whether the pod it
  // landed in was freshly written.
  virtual void observe(ObjectId, bool /*pod_changed*/) {}
  virtual std::string name() const = 0;
};

class ConstantVolatility final : public VolatilityEstimator {
 public:
  explicit ConstantVolatility(double rate);
  double estimate(const ObjectFeatures&) const override { return rate_; }
  std::string name() const override;

 private:
  double rate_;
};

// clamp(w0 + w1*log(1+size) + w2*log(1+children), 0, 1).
//
// Leaves in the workload model are never rewritten in place (mutations swap
// in fresh leaf objects), so with `immutable_leaves` set a leaf scores 0.
class FeatureHeuristic final : public VolatilityEstimator {
 public:
  struct Weights {
    double w0 = 0.05;
    double w1 = 0.01;
    double w2 = 0.02;
    bool immutable_leaves = true;
  };

  FeatureHeuristic() = default;
  explicit FeatureHeuristic(Weights weights) : weights_(weights) {}
  double estimate(const ObjectFeatures& object) const override;
  std::string name() const override { return "feature"; }

 private:
  Weights weights_;
};

// Laplace-smoothed change frequency per object: (changes + 1) / (saves + 2).
// An object is counted as changed at a save when its pod had to be written.
class EmpiricalFrequency final : public VolatilityEstimator {
 public:
  struct History {
    std::uint32_t changes = 0;
    std::uint32_t checkpoints = 0;
  };

  double estimate(const ObjectFeatures& object) const override;
  void observe(ObjectId id, bool pod_changed) override;
  std::string name() const override { return "empirical"; }

  void set_history(ObjectId id, History h) { history_[id] = h; }
  std::size_t tracked() const { return history_.size(); }

 private:
  std::unordered_map<ObjectId, History, ObjectIdHash> history_;
};

// Lookup table used by tests and the optimality harness; falls back to a
// default for unknown ids.
class TableVolatility final : public VolatilityEstimator {
 public:
  explicit TableVolatility(std::unordered_map<ObjectId, double, ObjectIdHash> table,
                           double fallback = 0.0)
      : table_(std::move(table)), fallback_(fallback) {}
  double estimate(const ObjectFeatures& object) const override;
  std::string name() const override { return "table"; }

 private:
  std::unordered_map<ObjectId, double, ObjectIdHash> table_;
  double fallback_;
};

// ---------------------------------------------------------------------------
// Podding decision strategies

class PoddingOptimizer {
 public:
  virtual ~PoddingOptimizer() = default;
  virtual PoddingAction decide(const ObjectFeatures& object, double volatility,
                               const PodStats& current_pod) = 0;
  // Volatility used for pod statistics; baselines that ignore it return 0.
  virtual double volatility(const ObjectFeatures&) const { return 0.0; }
  virtual void observe(ObjectId, bool) {}
  virtual std::string name() const = 0;
};

class BundleAll final : public PoddingOptimizer {
 public:
  PoddingAction decide(const ObjectFeatures&, double, const PodStats&) override {
    return PoddingAction::kBundle;
  }
  std::string name() const override { return "bundle-all"; }
};

class SplitAll final : public PoddingOptimizer {
 public:
  PoddingAction decide(const ObjectFeatures&, double, const PodStats&) override {
    return PoddingAction::kSplitContinue;
  }
  std::string name() const override { return "split-all"; }
};

// Uniform over the three actions from a seeded mt19937_64 (output % 3).
class RandomActions final : public PoddingOptimizer {
 public:
  explicit RandomActions(std::uint64_t seed) : rng_(seed) {}
  PoddingAction decide(const ObjectFeatures&, double, const PodStats&) override;
  std::string name() const override { return "random"; }

 private:
  std::mt19937_64 rng_;
};

using TypeCatalog = std::map<ObjectKind, PoddingAction>;

// Parses "kind action" lines (kinds: leaf, container; actions: bundle,
// split-continue, split-final). '#' starts a comment.
TypeCatalog parse_type_catalog(std::string_view text);
TypeCatalog default_type_catalog();

class TypeBasedHeuristic final : public PoddingOptimizer {
 public:
  explicit TypeBasedHeuristic(TypeCatalog catalog) : catalog_(std::move(catalog)) {}
  PoddingAction decide(const ObjectFeatures& object, double, const PodStats&) override;
  std::string name() const override { return "tbh"; }

 private:
  TypeCatalog catalog_;
};

class LearnedGreedy final : public PoddingOptimizer {
 public:
  LearnedGreedy(CostParams params, std::shared_ptr<VolatilityEstimator> estimator,
                std::shared_ptr<DecisionMemo> memo, std::string label = "lga");

  PoddingAction decide(const ObjectFeatures& object, double volatility,
                       const PodStats& current_pod) override;
  double volatility(const ObjectFeatures& object) const override;
  void observe(ObjectId id, bool changed) override { estimator_->observe(id, changed); }
  std::string name() const override { return label_; }

  const CostParams& params() const { return params_; }
  DecisionMemo* memo() const { return memo_.get(); }

 private:
  CostParams params_;
  std::shared_ptr<VolatilityEstimator> estimator_;
  std::shared_ptr<DecisionMemo> memo_;
  std::string label_;
};

// ---------------------------------------------------------------------------
// Exhaustive oracle over first-visit trees

// Objects in depth-first first-visit order; parent[0] == -1 is the traversal
// root, every other parent index is smaller than its child.
struct FirstVisitTree {
  std::vector<int> parent;
  std::vector<double> sizes;
  std::vector<double> volatilities;
  std::vector<ObjectId> ids;

  std::size_t decisions() const { return parent.empty() ? 0 : parent.size() - 1; }
};

// Builds the first-visit tree of everything reachable from `names`, rooted at a
// namespace root holding only those names (as the podder sees it).
FirstVisitTree first_visit_tree(const ObjectGraph& graph, const NameSet& names,
                                const VolatilityEstimator& estimator);

// Bit i of `split_mask` set means node i+1 starts its own pod.
std::vector<PodMembers> partition_from_splits(const FirstVisitTree& tree,
                                              std::uint64_t split_mask);
double tree_cost(const FirstVisitTree& tree, std::uint64_t split_mask,
                 const CostParams& params);

struct ExhaustiveResult {
  std::vector<PodMembers> partition;
  std::uint64_t split_mask = 0;
  double cost = 0.0;
};

inline constexpr std::size_t kDefaultExhaustiveCap = 20;

// Replays a precomputed action per object; unknown objects bundle.
class PlannedActions final : public PoddingOptimizer {
 public:
  explicit PlannedActions(std::unordered_map<ObjectId, PoddingAction, ObjectIdHash> plan)
      : plan_(std::move(plan)) {}
  PoddingAction decide(const ObjectFeatures& object, double, const PodStats&) override {
    auto it = plan_.find(object.id);
    return it == plan_.end() ? PoddingAction::kBundle : it->second;
  }
  std::string name() const override { return "exhaustive"; }

 private:
  std::unordered_map<ObjectId, PoddingAction, ObjectIdHash> plan_;
};

// Minimal expected cost over all 2^decisions bundle/split assignments.
// Throws TooLarge above `max_decisions`.
ExhaustiveResult exhaustive_optimal(const FirstVisitTree& tree, const CostParams& params,
                                    std::size_t max_decisions = kDefaultExhaustiveCap);

// Exhaustive optimum of the namespace restricted to `names`, as a replayable
// plan (split edges become split-continue).
std::shared_ptr<PlannedActions> plan_exhaustive(const ObjectGraph& graph, const NameSet& names,
                                                const VolatilityEstimator& estimator,
                                                const CostParams& params,
                                                std::size_t max_decisions = kDefaultExhaustiveCap);

// All-singleton cost: n * c_pod + sum s(u) * lambda(u).
double split_all_cost(const FirstVisitTree& tree, const CostParams& params);

// alpha = min{c_pod / (2 gamma), sqrt(c_pod / (16 mu_s mu_lambda))}; infinite
// when the corresponding denominator vanishes.
double approximation_alpha(const FirstVisitTree& tree, const CostParams& params);

}  // namespace podstore
