#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "podstore/change_detector.hpp"
#include "podstore/object_graph.hpp"
#include "podstore/optimizer.hpp"
#include "podstore/podder.hpp"
#include "podstore/storage.hpp"

namespace podstore {

struct StoreConfig {
  // bundle-all, split-all, random, tbh, lga, lga-0, lga-1, exhaustive
  std::string optimizer = "lga";
  // Volatility model behind lga / exhaustive: feature or empirical.
  std::string estimator = "feature";
  CostParams params;
  std::uint32_t page_size = kDefaultPageSize;
  std::uint64_t thesaurus_bytes = kDefaultThesaurusBytes;
  DigestMode digest_mode = DigestMode::kXxh3;
  std::uint64_t seed = 0;
  TypeCatalog catalog = default_type_catalog();
  std::size_t exhaustive_cap = kDefaultExhaustiveCap;
  // Off: every save re-pods every variable.
  bool filter_active = true;
};

std::string describe(const StoreConfig& config);
bool is_strategy(const std::string& name);
const std::vector<std::string>& strategy_names();

struct SaveStats {
  TimeId time_id = 0;
  std::size_t active_variables = 0;
  std::size_t carried_variables = 0;
  std::size_t pods_total = 0;
  std::size_t pods_written = 0;
  std::size_t pods_skipped = 0;
  std::uint64_t pod_bytes_written = 0;
  std::uint64_t manifest_bytes = 0;
  std::size_t objects_podded = 0;
  double seconds = 0.0;
};

// Variables whose prior root pod shares a weakly connected component of
// `prior` with an accessed variable's root pod. Variables without a prior
// root are active. Pods in `excluded` (the namespace root pods) are left out
// of the connectivity.
NameSet active_variable_filter(const NameSet& accessed, const NameSet& names,
                               const PodGraph& prior,
                               const std::map<std::string, PodId>& prior_roots,
                               const std::set<PodId>& excluded);

// A save split into the part that needs the namespace (prepare) and the part
// that may run on a worker reading nodes through a NodeSource (commit).
struct PreparedSave {
  TimeId time_id = 0;
  ObjectId root;
  std::map<std::string, ObjectId> active_targets;
  NameSet names;  // every variable bound at prepare time
  NameSet active;
  // Inactive variables: target and the global memo id already on disk.
  std::map<std::string, std::pair<ObjectId, std::uint64_t>> carried_roots;
  std::shared_ptr<PoddingOptimizer> optimizer;
};

class Store {
 public:
  Store(StoreConfig config, std::unique_ptr<Backend> backend);

  // Variables the next save would re-pod.
  NameSet active_variables(const ObjectGraph& ns, const NameSet& accessed) const;

  TimeId save(const ObjectGraph& ns, const NameSet& accessed, SaveStats* stats = nullptr);

  PreparedSave prepare_save(const ObjectGraph& ns, const NameSet& accessed);
  TimeId commit_save(const PreparedSave& prepared, const NodeSource& source,
                     SaveStats* stats = nullptr);
  // Drops memo / page entries of objects that no longer exist.
  void prune(const ObjectGraph& ns);

  ObjectGraph load(const NameSet& names, TimeId t) const;
  void load_into(ObjectGraph& out, const NameSet& names, TimeId t) const;

  std::vector<TimeId> list_time_ids() const { return backend_->list_time_ids(); }
  SaveManifest manifest(TimeId t) const;

  const StoreConfig& config() const { return config_; }
  Backend& backend() { return *backend_; }
  const Backend& backend() const { return *backend_; }
  const ChangeDetector& detector() const { return detector_; }
  const DecisionMemo& memo() const { return *memo_; }
  const GlobalPageAllocator& allocator() const { return allocator_; }
  const PodGraph& live_graph() const { return live_graph_; }
  const std::unordered_map<ObjectId, PoddingAction, ObjectIdHash>& last_actions() const {
    return last_actions_;
  }
  // Called on the saving thread before each pod is checked; tests use it to
  // slow the worker down.
  void set_pod_hook(std::function<void(PodId)> hook) { pod_hook_ = std::move(hook); }

  std::size_t last_load_fetches() const { return last_fetches_; }
  std::uint64_t max_thesaurus_footprint() const { return max_footprint_; }

 private:
  std::shared_ptr<PoddingOptimizer> make_optimizer(const ObjectGraph& ns,
                                                   const NameSet& active) const;
  void restore_from_backend();

  StoreConfig config_;
  std::unique_ptr<Backend> backend_;
  ChangeDetector detector_;
  GlobalPageAllocator allocator_;
  std::shared_ptr<DecisionMemo> memo_;
  std::shared_ptr<VolatilityEstimator> estimator_;
  std::shared_ptr<PoddingOptimizer> persistent_optimizer_;

  TimeId next_time_ = 1;
  bool has_prior_ = false;
  PodGraph live_graph_;
  std::set<PodId> root_pods_;
  std::map<std::string, CarriedRef> live_refs_;
  std::unordered_map<ObjectId, PoddingAction, ObjectIdHash> last_actions_;
  std::uint64_t max_footprint_ = 0;
  std::function<void(PodId)> pod_hook_;

  mutable std::mutex cache_mutex_;
  mutable std::map<TimeId, SaveManifest> manifests_;
  mutable std::size_t last_fetches_ = 0;
};

}  // namespace podstore
