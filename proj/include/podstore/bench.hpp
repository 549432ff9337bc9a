#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "podstore/async_engine.hpp"
#include "podstore/object_graph.hpp"
#include "podstore/optimizer.hpp"
#include "podstore/store.hpp"
#include "podstore/workload.hpp"

namespace podstore {

// ---------------------------------------------------------------------------
// Random instances

struct GraphGenOptions {
  std::size_t max_nodes = 10000;
  // Node counts are log-uniform in [1, max_nodes].
  bool log_uniform_size = true;
  double container_prob = 0.4;
  double new_root_prob = 0.02;
  double extra_edge_prob = 0.15;  // per container: self loops, back edges, sharing
  double alias_prob = 0.3;        // chance of an extra variable bound mid-graph
  std::uint32_t max_payload = 48;
  double duplicate_payload_prob = 0.1;
};

ObjectGraph random_graph(std::mt19937_64& rng, const GraphGenOptions& options = {});

// A namespace whose first-visit tree has exactly `decisions` non-root nodes,
// with a volatility per object.
struct TreeInstance {
  ObjectGraph graph;
  NameSet names;
  std::unordered_map<ObjectId, double, ObjectIdHash> volatility;
};

struct TreeGenOptions {
  double min_size = 16;      // object sizes are log-uniform in [min_size, max_size]
  double max_size = 65536;
  double zero_volatility_prob = 0.3;  // otherwise uniform in [0, 1]
};

TreeInstance random_tree_instance(std::mt19937_64& rng, std::size_t decisions,
                                  const TreeGenOptions& options = {});

struct OptimalityResult {
  std::size_t decisions = 0;
  double lga = 0;
  double optimal = 0;
  double split_all = 0;
  double alpha = 0;
};

// Runs LGA through pod_save on the instance and prices the resulting pods
// against the exhaustive optimum of the same first-visit tree.
OptimalityResult compare_to_optimal(const TreeInstance& instance, const CostParams& params);

// Stand-alone optimizer for raw pod_save calls; "exhaustive" plans against
// `graph` restricted to `names` (TooLarge above the cap).
std::shared_ptr<PoddingOptimizer> make_strategy(const std::string& name, const CostParams& params,
                                                std::uint64_t seed, const ObjectGraph& graph,
                                                const NameSet& names);

// Bytes of the namespace encoded as one pod: the yardstick for storage ratios.
std::uint64_t namespace_bytes(const ObjectGraph& ns);

// ---------------------------------------------------------------------------
// Harness

struct CheckpointMetrics {
  TimeId time_id = 0;
  double save_seconds = 0;
  double blocking_seconds = 0;
  std::size_t pods_total = 0;
  std::size_t pods_written = 0;
  std::size_t pods_skipped = 0;
  std::uint64_t bytes_written = 0;  // pods + manifest
  std::uint64_t manifest_bytes = 0;
  std::uint64_t total_storage_bytes = 0;
  std::size_t active_variables = 0;
  std::size_t objects_podded = 0;
};

struct RunMetrics {
  std::string label;
  std::string optimizer;
  bool async = false;
  std::vector<CheckpointMetrics> checkpoints;
  std::uint64_t storage_bytes = 0;
  std::uint64_t pod_bytes = 0;
  std::uint64_t manifest_bytes = 0;
  std::uint64_t audit_bytes = 0;
  std::uint64_t namespace_bytes = 0;  // of the final namespace
  std::size_t object_count = 0;
  double save_seconds = 0;
  double blocking_seconds = 0;
  double throughput = 0;  // objects podded per second of save time
  std::size_t loads_verified = 0;
  std::size_t load_mismatches = 0;
};

struct RunOptions {
  StoreConfig store;
  std::string backend = "mem";
  std::string dir;
  bool async = false;
  std::uint64_t seed = 0;
  // Keep a copy of the namespace at every checkpoint (needed by load statements).
  bool keep_snapshots = false;
  bool check_locality = true;
  std::chrono::microseconds pod_delay{0};
  std::string label;
};

// Seed handed to the i-th statement: splitmix64(seed + i).
std::uint64_t statement_seed(std::uint64_t seed, std::size_t index);

class Harness {
 public:
  explicit Harness(RunOptions options);
  ~Harness();

  void execute(const Statement& stmt);
  void run(const Script& script);
  // Waits for any in-flight save and totals the metrics.
  RunMetrics finish();

  ObjectGraph& ns() { return ns_; }
  Store& store() { return *store_; }
  // Namespace copies by time id (empty unless keep_snapshots).
  const std::map<TimeId, ObjectGraph>& snapshots() const { return snapshots_; }
  // Verifies load(names, t) against the retained snapshot.
  bool verify_load(const NameSet& names, TimeId t);
  ObjectGraph load(const NameSet& names, TimeId t);
  // Waits for an in-flight save and folds its stats into the metrics. The
  // wait counts as blocking unless `blocking` is false (end of run).
  void settle(bool blocking = true);

 private:
  void checkpoint();

  RunOptions options_;
  ObjectGraph ns_;
  std::unique_ptr<Store> store_;
  std::unique_ptr<AsyncSession> session_;
  std::size_t index_ = 0;
  NameSet accessed_;
  std::vector<CheckpointMetrics> rows_;
  std::vector<std::unique_ptr<SaveStats>> pending_;
  std::map<TimeId, ObjectGraph> snapshots_;
  RunMetrics metrics_;
  double statement_blocking_ = 0;
};

RunMetrics run_script(const Script& script, const RunOptions& options);

// CSV: one row per checkpoint, columns fixed (see csv_header()).
std::string csv_header();
std::string to_csv(const RunMetrics& m, bool header = true);
std::string to_json(const RunMetrics& m);
std::string to_json(const std::vector<RunMetrics>& runs);

// ---------------------------------------------------------------------------
// Workload generators

struct NamedScript {
  std::string label;
  Script script;
  double fraction = 0;  // mutation sweeps only
};

inline constexpr std::uint32_t kSweepLists = 100;
inline constexpr std::uint32_t kSweepStrings = 100000;
inline constexpr std::uint32_t kSweepStringBytes = 100;

// make_lists then 9 rounds of (mutate_fraction f, checkpoint).
Script mutation_script(double scale, double fraction, std::uint64_t seed = 1);
std::vector<double> sweep_fractions();  // 0, 0.125, ..., 1
std::vector<NamedScript> gen_mutation_sweep(double scale, std::uint64_t seed = 1);

// 100 lists of {1, 10, ..., 10000} strings, plus the small {1,2,3} x {1,2,3}
// variants.
std::vector<NamedScript> gen_scale_sweep(bool include_large = true);

struct CompareRow {
  std::string script;
  std::string strategy;
  std::optional<RunMetrics> metrics;
  std::string error;  // "too-large" when exhaustive was not eligible
};

std::vector<CompareRow> compare_optimizers(const std::vector<NamedScript>& scripts,
                                           const std::vector<std::string>& strategies,
                                           const RunOptions& base);
std::string compare_table_csv(const std::vector<CompareRow>& rows);

// ---------------------------------------------------------------------------
// Self-check suites run by `verify`.

struct VerifyCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 7;
  std::size_t graphs = 50;
  std::size_t max_nodes = 2000;
  std::size_t instances = 40;
  std::size_t max_decisions = 14;
  std::size_t supermodular_triples = 2000;
  CostParams params;
};

std::vector<VerifyCheck> verify(const VerifyOptions& options);

}  // namespace podstore
