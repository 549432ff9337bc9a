#include "podstore/async_engine.hpp"

#include <thread>

#include "podstore/error.hpp"

namespace podstore {

namespace {

bool is_mutating(std::string_view kind) {
  return kind == "make_lists" || kind == "mutate_fraction" || kind == "append_leaf" ||
         kind == "assign" || kind == "load";
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

Allowlist::Allowlist() : kinds_{"read", "sum", "head"} {}

Allowlist Allowlist::empty_list() { return Allowlist(Empty{}); }

Allowlist Allowlist::parse(std::string_view text) {
  Allowlist list{Empty{}};
  std::string word;
  auto flush = [&] {
    if (!word.empty()) list.add(word);
    word.clear();
  };
  for (char c : text) {
    if (c == ',' || c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      flush();
    } else {
      word += c;
    }
  }
  flush();
  return list;
}

void Allowlist::add(std::string_view kind) {
  const auto& known = statement_kinds();
  if (std::find(known.begin(), known.end(), kind) == known.end()) {
    throw Error(ErrorCode::kInvalidArgument, "unknown statement kind '" + std::string(kind) + "'");
  }
  if (is_mutating(kind)) {
    throw Error(ErrorCode::kInvalidArgument,
                "statement kind '" + std::string(kind) + "' mutates and cannot be allowlisted");
  }
  kinds_.emplace(kind);
}

Judgement ascc_check(const Statement& stmt, const Allowlist& allowlist) {
  // Statements have no sub-forms, so the variant decides.
  return allowlist.contains(statement_kind(stmt)) ? Judgement::kStatic : Judgement::kNonStatic;
}

Guard guard_statement(const Statement& stmt, const NameSet& active, const Allowlist& allowlist) {
  if (ascc_check(stmt, allowlist) == Judgement::kStatic) return Guard::kProceed;
  for (const auto& name : accessed_variables(stmt)) {
    if (active.contains(name)) return Guard::kBlockUntilSaveDone;
  }
  return Guard::kProceed;
}

AsyncSession::AsyncSession(Store& store, ObjectGraph& ns, Allowlist allowlist)
    : store_(store), ns_(ns), allowlist_(std::move(allowlist)) {}

AsyncSession::~AsyncSession() {
  if (worker_.joinable()) worker_.join();
  store_.set_pod_hook(nullptr);
}

bool AsyncSession::save_in_flight() const { return current_.valid() && !current_.done(); }

NameSet AsyncSession::active_set() {
  std::lock_guard lock(locks_.ns_lock);
  return active_;
}

std::optional<TimeId> AsyncSession::join() {
  if (worker_.joinable()) worker_.join();
  if (!current_.valid()) return std::nullopt;
  SaveHandle h = std::move(current_);
  current_ = SaveHandle();
  return h.join();
}

SaveHandle AsyncSession::begin_async_save(const NameSet& accessed, SaveStats* stats) {
  // Only one save at a time; a failed predecessor reports through its own handle.
  if (worker_.joinable()) worker_.join();
  current_ = SaveHandle();

  locks_.active_lock.acquire();
  PreparedSave prepared;
  {
    std::lock_guard lock(locks_.ns_lock);
    try {
      prepared = store_.prepare_save(ns_, accessed);
    } catch (...) {
      locks_.active_lock.release();
      throw;
    }
    active_ = prepared.active;
  }

  if (pod_delay_.count() > 0) {
    store_.set_pod_hook([d = pod_delay_](PodId) { std::this_thread::sleep_for(d); });
  } else {
    store_.set_pod_hook(nullptr);
  }

  std::promise<TimeId> promise;
  current_ = SaveHandle(promise.get_future().share());
  worker_ = std::thread([this, prepared = std::move(prepared), promise = std::move(promise),
                         stats]() mutable {
    auto finish = [this] {
      {
        std::lock_guard lock(locks_.ns_lock);
        active_.clear();
      }
      locks_.active_lock.release();
    };
    try {
      NodeSource source = [this](ObjectId id) {
        std::lock_guard lock(locks_.ns_lock);
        return ns_.node(id);
      };
      TimeId t = store_.commit_save(prepared, source, stats);
      finish();
      promise.set_value(t);
    } catch (...) {
      finish();
      promise.set_exception(std::current_exception());
    }
  });
  return current_;
}

GuardedResult AsyncSession::execute(const Statement& stmt, std::uint64_t rng_seed,
                                    const ExecuteOptions& options) {
  GuardedResult r;
  auto t0 = std::chrono::steady_clock::now();
  {
    std::lock_guard lock(locks_.ns_lock);
    r.guard = guard_statement(stmt, active_, allowlist_);
  }
  if (r.guard == Guard::kProceed) {
    t0 = std::chrono::steady_clock::now();
    std::unique_lock lock(locks_.ns_lock);
    r.blocked_seconds = seconds_since(t0);
    r.effect = execute_statement(ns_, stmt, rng_seed, options);
    return r;
  }

  t0 = std::chrono::steady_clock::now();
  locks_.active_lock.acquire();
  try {
    std::unique_lock lock(locks_.ns_lock);
    r.blocked_seconds = seconds_since(t0);
    r.effect = execute_statement(ns_, stmt, rng_seed, options);
  } catch (...) {
    locks_.active_lock.release();
    throw;
  }
  locks_.active_lock.release();
  return r;
}

ObjectGraph AsyncSession::load(const NameSet& names, TimeId t) {
  join();
  return store_.load(names, t);
}

}  // namespace podstore
