#include "podstore/bench.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "podstore/error.hpp"

namespace podstore {

std::uint64_t statement_seed(std::uint64_t seed, std::size_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// --- harness -----------------------------------------------------------------

Harness::Harness(RunOptions options) : options_(std::move(options)) {
  store_ = std::make_unique<Store>(options_.store, make_backend(options_.backend, options_.dir));
  if (options_.async) {
    session_ = std::make_unique<AsyncSession>(*store_, ns_);
    session_->set_pod_delay(options_.pod_delay);
  } else if (options_.pod_delay.count() > 0) {
    store_->set_pod_hook([d = options_.pod_delay](PodId) { std::this_thread::sleep_for(d); });
  }
  metrics_.label = options_.label;
  metrics_.optimizer = options_.store.optimizer;
  metrics_.async = options_.async;
}

Harness::~Harness() {
  if (session_) {
    try {
      session_->join();
    } catch (...) {
    }
  }
}

void Harness::execute(const Statement& stmt) {
  const std::uint64_t seed = statement_seed(options_.seed, index_++);
  if (std::holds_alternative<Checkpoint>(stmt)) {
    checkpoint();
    return;
  }
  if (const auto* load = std::get_if<Load>(&stmt)) {
    NameSet names(load->names.begin(), load->names.end());
    settle();
    ++metrics_.loads_verified;
    if (!verify_load(names, load->time_id)) ++metrics_.load_mismatches;
    return;
  }
  ExecuteOptions eo;
  eo.check_locality = options_.check_locality;
  if (session_) {
    GuardedResult r = session_->execute(stmt, seed, eo);
    statement_blocking_ += r.blocked_seconds;
    accessed_.insert(r.effect.accessed.begin(), r.effect.accessed.end());
  } else {
    EffectRecord fx = execute_statement(ns_, stmt, seed, eo);
    accessed_.insert(fx.accessed.begin(), fx.accessed.end());
  }
}

void Harness::run(const Script& script) {
  for (const auto& s : script.statements) execute(s);
}

// Folds the stats of a finished async save into its row.
void Harness::settle(bool blocking) {
  if (!session_) return;
  auto t0 = std::chrono::steady_clock::now();
  session_->join();
  const double waited = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!rows_.empty()) {
    CheckpointMetrics& row = rows_.back();
    row.blocking_seconds += statement_blocking_ + (blocking ? waited : 0.0);
    statement_blocking_ = 0;
    const SaveStats& s = *pending_.back();
    row.time_id = s.time_id;
    row.save_seconds = s.seconds;
    row.pods_total = s.pods_total;
    row.pods_written = s.pods_written;
    row.pods_skipped = s.pods_skipped;
    row.manifest_bytes = s.manifest_bytes;
    row.bytes_written = s.pod_bytes_written + s.manifest_bytes;
    row.active_variables = s.active_variables;
    row.objects_podded = s.objects_podded;
    row.total_storage_bytes =
        store_->backend().pod_bytes_written() + store_->backend().manifest_bytes_written();
  }
}

void Harness::checkpoint() {
  settle();
  ns_.collect_garbage();
  store_->prune(ns_);
  if (options_.keep_snapshots) snapshots_.emplace(store_->list_time_ids().size() + 1, ns_);

  CheckpointMetrics row;
  if (session_) {
    pending_.push_back(std::make_unique<SaveStats>());
    auto t0 = std::chrono::steady_clock::now();
    session_->begin_async_save(accessed_, pending_.back().get());
    row.blocking_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    accessed_.clear();
    rows_.push_back(row);
    return;
  }
  SaveStats s;
  store_->save(ns_, accessed_, &s);
  accessed_.clear();
  row.time_id = s.time_id;
  row.save_seconds = s.seconds;
  row.blocking_seconds = s.seconds;
  row.pods_total = s.pods_total;
  row.pods_written = s.pods_written;
  row.pods_skipped = s.pods_skipped;
  row.manifest_bytes = s.manifest_bytes;
  row.bytes_written = s.pod_bytes_written + s.manifest_bytes;
  row.active_variables = s.active_variables;
  row.objects_podded = s.objects_podded;
  row.total_storage_bytes =
      store_->backend().pod_bytes_written() + store_->backend().manifest_bytes_written();
  rows_.push_back(row);
}

bool Harness::verify_load(const NameSet& names, TimeId t) {
  auto it = snapshots_.find(t);
  if (it == snapshots_.end()) {
    throw Error(ErrorCode::kInvalidArgument,
                "no retained snapshot for time " + std::to_string(t) + " (enable snapshots)");
  }
  ObjectGraph loaded = load(names, t);
  return canonical_serialize(loaded, names) == canonical_serialize(it->second, names);
}

ObjectGraph Harness::load(const NameSet& names, TimeId t) {
  settle();
  return store_->load(names, t);
}

RunMetrics Harness::finish() {
  settle(false);
  RunMetrics m = metrics_;
  m.checkpoints = rows_;
  const Backend& b = store_->backend();
  m.pod_bytes = b.pod_bytes_written();
  m.manifest_bytes = b.manifest_bytes_written();
  m.storage_bytes = m.pod_bytes + m.manifest_bytes;
  m.audit_bytes = b.audit_bytes();
  m.namespace_bytes = namespace_bytes(ns_);
  for (const auto& r : rows_) {
    m.object_count += r.objects_podded;
    m.save_seconds += r.save_seconds;
    m.blocking_seconds += r.blocking_seconds;
  }
  m.throughput = m.save_seconds > 0 ? static_cast<double>(m.object_count) / m.save_seconds : 0.0;
  return m;
}

RunMetrics run_script(const Script& script, const RunOptions& options) {
  RunOptions o = options;
  for (const auto& s : script.statements) {
    if (std::holds_alternative<Load>(s)) o.keep_snapshots = true;
  }
  Harness h(o);
  h.run(script);
  return h.finish();
}

// --- output ------------------------------------------------------------------

std::string csv_header() {
  return "label,optimizer,async,time_id,save_seconds,blocking_seconds,pods_total,pods_written,"
         "pods_skipped,bytes_written,manifest_bytes,total_storage_bytes,active_variables,"
         "objects_podded";
}

std::string to_csv(const RunMetrics& m, bool header) {
  std::ostringstream out;
  if (header) out << csv_header() << "\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  for (const auto& r : m.checkpoints) {
    out << m.label << ',' << m.optimizer << ',' << (m.async ? 1 : 0) << ',' << r.time_id << ','
        << num(r.save_seconds) << ',' << num(r.blocking_seconds) << ',' << r.pods_total << ','
        << r.pods_written << ',' << r.pods_skipped << ',' << r.bytes_written << ','
        << r.manifest_bytes << ',' << r.total_storage_bytes << ',' << r.active_variables << ','
        << r.objects_podded << "\n";
  }
  return out.str();
}

namespace {

nlohmann::json json_of(const RunMetrics& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : m.checkpoints) {
    rows.push_back({{"time_id", r.time_id},
                    {"save_seconds", r.save_seconds},
                    {"blocking_seconds", r.blocking_seconds},
                    {"pods_total", r.pods_total},
                    {"pods_written", r.pods_written},
                    {"pods_skipped", r.pods_skipped},
                    {"bytes_written", r.bytes_written},
                    {"manifest_bytes", r.manifest_bytes},
                    {"total_storage_bytes", r.total_storage_bytes},
                    {"active_variables", r.active_variables},
                    {"objects_podded", r.objects_podded}});
  }
  return {{"label", m.label},
          {"optimizer", m.optimizer},
          {"async", m.async},
          {"checkpoints", rows},
          {"storage_bytes", m.storage_bytes},
          {"pod_bytes", m.pod_bytes},
          {"manifest_bytes", m.manifest_bytes},
          {"audit_bytes", m.audit_bytes},
          {"namespace_bytes", m.namespace_bytes},
          {"object_count", m.object_count},
          {"save_seconds", m.save_seconds},
          {"blocking_seconds", m.blocking_seconds},
          {"throughput_objects_per_second", m.throughput},
          {"loads_verified", m.loads_verified},
          {"load_mismatches", m.load_mismatches}};
}

}  // namespace

std::string to_json(const RunMetrics& m) { return json_of(m).dump(2); }

std::string to_json(const std::vector<RunMetrics>& runs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : runs) arr.push_back(json_of(r));
  return arr.dump(2);
}

// --- generators --------------------------------------------------------------

Script mutation_script(double scale, double fraction, std::uint64_t seed) {
  if (!(scale > 0.0 && scale <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "scale must be in (0, 1]");
  }
  const auto strings =
      std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::llround(kSweepStrings * scale)));
  Script s;
  s.statements.push_back(MakeLists{"data", kSweepLists, strings, kSweepStringBytes});
  s.statements.push_back(Checkpoint{});
  for (std::uint64_t i = 0; i < 9; ++i) {
    s.statements.push_back(MutateFraction{"data", fraction, seed * 1000 + i});
    s.statements.push_back(Checkpoint{});
  }
  return s;
}

std::vector<double> sweep_fractions() {
  std::vector<double> f;
  for (int i = 0; i <= 8; ++i) f.push_back(i / 8.0);
  return f;
}

std::vector<NamedScript> gen_mutation_sweep(double scale, std::uint64_t seed) {
  std::vector<NamedScript> out;
  for (double f : sweep_fractions()) {
    char label[32];
    std::snprintf(label, sizeof label, "mutation_f%.3f", f);
    out.push_back({label, mutation_script(scale, f, seed), f});
  }
  return out;
}

std::vector<NamedScript> gen_scale_sweep(bool include_large) {
  std::vector<NamedScript> out;
  if (include_large) {
    for (std::uint32_t n : {1U, 10U, 100U, 1000U, 10000U}) {
      Script s;
      s.statements.push_back(MakeLists{"data", kSweepLists, n, kSweepStringBytes});
      s.statements.push_back(Checkpoint{});
      s.statements.push_back(MutateFraction{"data", 0.1, n});
      s.statements.push_back(Checkpoint{});
      out.push_back({"scale_100x" + std::to_string(n), std::move(s)});
    }
  }
  for (std::uint32_t lists : {1U, 2U, 3U}) {
    for (std::uint32_t strings : {1U, 2U, 3U}) {
      Script s;
      s.statements.push_back(MakeLists{"data", lists, strings, kSweepStringBytes});
      s.statements.push_back(Checkpoint{});
      s.statements.push_back(MutateFraction{"data", 0.5, lists * 10 + strings});
      s.statements.push_back(Checkpoint{});
      out.push_back({"small_" + std::to_string(lists) + "x" + std::to_string(strings), std::move(s)});
    }
  }
  return out;
}

std::vector<CompareRow> compare_optimizers(const std::vector<NamedScript>& scripts,
                                           const std::vector<std::string>& strategies,
                                           const RunOptions& base) {
  std::vector<CompareRow> rows;
  for (const auto& ns : scripts) {
    for (const auto& strategy : strategies) {
      if (!is_strategy(strategy)) {
        throw Error(ErrorCode::kInvalidArgument, "unknown strategy '" + strategy + "'");
      }
      RunOptions o = base;
      o.store.optimizer = strategy;
      o.label = ns.label;
      if (o.backend == "dir") o.dir = base.dir + "/" + ns.label + "_" + strategy;
      CompareRow row{ns.label, strategy, std::nullopt, {}};
      try {
        row.metrics = run_script(ns.script, o);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kTooLarge) throw;
        row.error = "too-large";
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string compare_table_csv(const std::vector<CompareRow>& rows) {
  std::ostringstream out;
  out << "script,strategy,status,storage_bytes,pod_bytes,manifest_bytes,namespace_bytes,"
         "pods_written,save_seconds\n";
  for (const auto& r : rows) {
    out << r.script << ',' << r.strategy << ',';
    if (!r.metrics) {
      out << r.error << ",,,,,,\n";
      continue;
    }
    std::size_t written = 0;
    for (const auto& c : r.metrics->checkpoints) written += c.pods_written;
    char secs[32];
    std::snprintf(secs, sizeof secs, "%.6f", r.metrics->save_seconds);
    out << "ok," << r.metrics->storage_bytes << ',' << r.metrics->pod_bytes << ','
        << r.metrics->manifest_bytes << ',' << r.metrics->namespace_bytes << ',' << written << ','
        << secs << "\n";
  }
  return out.str();
}

}  // namespace podstore
