#pragma once

#include <chrono>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <set>
#include <string>
#include <string_view>
#include <thread>

#include "podstore/object_graph.hpp"
#include "podstore/store.hpp"
#include "podstore/workload.hpp"

namespace podstore {

// Statement kinds that never mutate; pre-populated with read, sum, head.
class Allowlist {
 public:
  Allowlist();
  static Allowlist empty_list();
  // Comma or whitespace separated statement kinds.
  static Allowlist parse(std::string_view text);

  // Rejects mutating kinds with InvalidArgument.
  void add(std::string_view kind);
  bool contains(std::string_view kind) const { return kinds_.contains(std::string(kind)); }
  const std::set<std::string, std::less<>>& kinds() const { return kinds_; }

 private:
  struct Empty {};
  explicit Allowlist(Empty) {}
  std::set<std::string, std::less<>> kinds_;
};

enum class Judgement { kStatic, kNonStatic };
enum class Guard { kProceed, kBlockUntilSaveDone };

Judgement ascc_check(const Statement& stmt, const Allowlist& allowlist);
Guard guard_statement(const Statement& stmt, const NameSet& active, const Allowlist& allowlist);

// ns_lock guards the namespace and the in-flight active set; active_lock is
// held by a save from begin to completion. Whenever both are needed,
// active_lock is taken first, and nobody waits on active_lock while holding
// ns_lock.
struct LockPair {
  std::mutex ns_lock;
  std::binary_semaphore active_lock{1};
};

class SaveHandle {
 public:
  SaveHandle() = default;
  explicit SaveHandle(std::shared_future<TimeId> f) : future_(std::move(f)) {}
  bool valid() const { return future_.valid(); }
  // Waits for the save; rethrows its error.
  TimeId join() const { return future_.get(); }
  bool done() const {
    return future_.wait_for(std::chrono::seconds(0)) == std::future_status::ready;
  }

 private:
  std::shared_future<TimeId> future_;
};

struct GuardedResult {
  EffectRecord effect;
  Guard guard = Guard::kProceed;
  double blocked_seconds = 0.0;
};

// One executor thread (the caller) and at most one podding worker.
class AsyncSession {
 public:
  AsyncSession(Store& store, ObjectGraph& ns, Allowlist allowlist = {});
  ~AsyncSession();
  AsyncSession(const AsyncSession&) = delete;
  AsyncSession& operator=(const AsyncSession&) = delete;

  // Joins an in-flight save first, then computes the active set and snapshot
  // of variable bindings synchronously and hands the rest to the worker.
  SaveHandle begin_async_save(const NameSet& accessed, SaveStats* stats = nullptr);

  GuardedResult execute(const Statement& stmt, std::uint64_t rng_seed,
                        const ExecuteOptions& options = {});

  // Waits for the in-flight save, if any. Returns its time id.
  std::optional<TimeId> join();
  bool save_in_flight() const;

  ObjectGraph load(const NameSet& names, TimeId t);

  // Sleeps this long on the worker before each pod.
  void set_pod_delay(std::chrono::microseconds delay) { pod_delay_ = delay; }
  NameSet active_set();
  LockPair& locks() { return locks_; }

 private:
  Store& store_;
  ObjectGraph& ns_;
  Allowlist allowlist_;
  LockPair locks_;
  NameSet active_;  // guarded by ns_lock
  std::thread worker_;
  SaveHandle current_;
  std::chrono::microseconds pod_delay_{0};
};

}  // namespace podstore
