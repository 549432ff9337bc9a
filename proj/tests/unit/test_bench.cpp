#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "podstore/bench.hpp"
#include "podstore/error.hpp"

using namespace podstore;
using namespace podstore::testing;

TEST_CASE("statement seeds are fixed") {
  CHECK(statement_seed(0, 0) == statement_seed(0, 0));
  CHECK(statement_seed(0, 0) != statement_seed(0, 1));
  CHECK(statement_seed(1, 0) != statement_seed(0, 0));
}

TEST_CASE("mutation sweep scripts") {
  auto scripts = gen_mutation_sweep(0.01);
  CHECK(scripts.size() == 9);
  for (const auto& s : scripts) {
    CHECK(std::get<MakeLists>(s.script.statements[0]) == MakeLists{"data", 100, 1000, 100});
    std::size_t checkpoints = 0;
    for (const auto& st : s.script.statements) checkpoints += std::holds_alternative<Checkpoint>(st);
    CHECK(checkpoints == 10);
    CHECK(parse_script(render(s.script)) == s.script);
  }
  CHECK(scripts.front().fraction == 0.0);
  CHECK(scripts.back().fraction == 1.0);
}

TEST_CASE("scale sweep scripts") {
  auto all = gen_scale_sweep(true);
  std::set<std::uint32_t> large;
  for (const auto& s : all) {
    const auto& m = std::get<MakeLists>(s.script.statements[0]);
    if (m.n_lists == 100) large.insert(m.strings_per_list);
  }
  CHECK(large == std::set<std::uint32_t>{1, 10, 100, 1000, 10000});
  auto small = gen_scale_sweep(false);
  CHECK(small.size() == 9);
  // The 1 x 1 cell is small enough for the exhaustive oracle.
  RunOptions o;
  o.store.optimizer = "exhaustive";
  RunMetrics m = run_script(small.front().script, o);
  CHECK(m.checkpoints.size() >= 1);
  CHECK(gen_scale_sweep(false).front().script == small.front().script);
}

TEST_CASE("csv schema is frozen") {
  CHECK(csv_header() ==
        "label,optimizer,async,time_id,save_seconds,blocking_seconds,pods_total,pods_written,"
        "pods_skipped,bytes_written,manifest_bytes,total_storage_bytes,active_variables,"
        "objects_podded");
  RunMetrics m = run_script(parse_script("make_lists d 3 3 3\ncheckpoint\nsum d\ncheckpoint\n"), {});
  std::string csv = to_csv(m);
  std::size_t lines = 0;
  for (char c : csv) lines += c == '\n';
  CHECK(lines == 3);
  auto j = nlohmann::json::parse(to_json(m));
  CHECK(j["checkpoints"].size() == 2);
}

TEST_CASE("run reconciles reported and audited bytes") {
  const auto dir = std::filesystem::temp_directory_path() / "podstore_bench_audit";
  std::filesystem::remove_all(dir);
  RunOptions o;
  o.backend = "dir";
  o.dir = dir.string();
  RunMetrics m = run_script(mutation_script(0.001, 0.5), o);
  CHECK(m.audit_bytes == m.storage_bytes);
  CHECK(m.checkpoints.size() == 10);
  CHECK(m.checkpoints.back().total_storage_bytes == m.storage_bytes);
  std::filesystem::remove_all(dir);
}

TEST_CASE("load statements are verified") {
  RunMetrics m = run_script(parse_script("make_lists d 4 4 4\ncheckpoint\nmutate_fraction d 1 3\n"
                                         "checkpoint\nload 1 d\nload 2 d\n"),
                            {});
  CHECK(m.loads_verified == 2);
  CHECK(m.load_mismatches == 0);
}

TEST_CASE("storage grows with the mutation fraction") {
  for (const std::string opt : {"lga", "bundle-all", "split-all"}) {
    std::uint64_t prev = 0;
    for (double f : sweep_fractions()) {
      RunOptions o;
      o.store.optimizer = opt;
      const std::uint64_t bytes = run_script(mutation_script(0.001, f), o).storage_bytes;
      CHECK(bytes >= prev);
      prev = bytes;
    }
  }
}

TEST_CASE("optimizer ordering on the mutation sweep") {
  RunOptions o;
  auto scripts = gen_mutation_sweep(0.002);
  std::vector<NamedScript> picks = {scripts[2], scripts[4], scripts[6]};
  auto rows = compare_optimizers(picks, {"lga", "bundle-all", "split-all", "lga-1"}, o);
  std::map<std::pair<std::string, std::string>, std::uint64_t> bytes;
  for (const auto& r : rows) {
    REQUIRE(r.metrics);
    bytes[{r.script, r.strategy}] = r.metrics->storage_bytes;
  }
  for (const auto& s : picks) {
    CHECK(bytes[{s.label, "lga"}] <= bytes[{s.label, "bundle-all"}]);
    CHECK(bytes[{s.label, "lga"}] <= bytes[{s.label, "split-all"}]);
    CHECK(bytes[{s.label, "lga-1"}] >= bytes[{s.label, "lga"}]);
  }
  CHECK(compare_table_csv(rows).rfind("script,strategy,status,", 0) == 0);
}

TEST_CASE("exhaustive on a large script reports too-large") {
  auto rows = compare_optimizers({{"big", mutation_script(0.001, 0.0), 0.0}}, {"exhaustive"}, {});
  REQUIRE(rows.size() == 1);
  CHECK_FALSE(rows[0].metrics);
  CHECK(rows[0].error == "too-large");
  RunOptions o;
  o.store.optimizer = "exhaustive";
  try {
    run_script(mutation_script(0.001, 0.0), o);
    FAIL("expected TooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTooLarge);
  }
}

TEST_CASE("async lowers perceived blocking") {
  Script s = parse_script(
      "make_lists a 20 20 50\nmake_lists b 20 20 50\ncheckpoint\n"
      "mutate_fraction a 1 1\ncheckpoint\nsum a\nhead b 3\nread b\nmutate_fraction b 1 2\n");
  RunOptions sync;
  sync.pod_delay = std::chrono::milliseconds(3);
  RunOptions async = sync;
  async.async = true;
  RunMetrics ms = run_script(s, sync);
  RunMetrics ma = run_script(s, async);
  CHECK(ma.blocking_seconds < ms.blocking_seconds);
  CHECK(ma.storage_bytes == ms.storage_bytes);
}

TEST_CASE("verify suite passes its hard checks") {
  VerifyOptions v;
  v.graphs = 10;
  v.max_nodes = 300;
  v.instances = 10;
  v.max_decisions = 10;
  v.supermodular_triples = 300;
  for (const auto& c : verify(v)) {
    INFO(c.name << ": " << c.detail);
    CHECK(c.passed);
  }
}
