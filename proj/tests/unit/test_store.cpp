#include <unistd.h>

#include <filesystem>

#include "doctest.h"
#include "helpers.hpp"
#include "podstore/bench.hpp"
#include "podstore/error.hpp"
#include "podstore/store.hpp"

using namespace podstore;
using namespace podstore::testing;
namespace fs = std::filesystem;

namespace {

Store mem_store(StoreConfig c = {}) { return Store(std::move(c), std::make_unique<MemoryBackend>()); }

NameSet all_names(const ObjectGraph& g) {
  NameSet n;
  for (const auto& [name, id] : g.variables()) n.insert(name);
  return n;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode{};
}

}  // namespace

TEST_CASE("first save treats everything as active") {
  Fig4 f;
  Store s = mem_store();
  CHECK(s.active_variables(f.g, {}) == all_names(f.g));
  SaveStats st;
  CHECK(s.save(f.g, {}, &st) == 1);
  CHECK(st.active_variables == 5);
  CHECK(st.pods_written == st.pods_total);
}

TEST_CASE("active filter on the notebook graph") {
  Fig4 f;
  Store s = mem_store();
  s.save(f.g, {});
  CHECK(s.active_variables(f.g, {"model"}) == NameSet{"dataset", "trainer", "model"});
  CHECK(s.active_variables(f.g, {"ax"}) == NameSet{"fig", "ax"});
  CHECK(s.active_variables(f.g, {}).empty());
}

TEST_CASE("active_variable_filter on a pod graph") {
  PodGraph g;
  g.pods = {{1, 1}, {1, 2}, {1, 3}, {1, 4}};
  g.edges = {{{1, 1}, {1, 2}}, {{1, 3}, {1, 2}}};
  std::map<std::string, PodId> roots = {{"a", {1, 1}}, {"b", {1, 3}}, {"c", {1, 4}}};
  CHECK(active_variable_filter({"b"}, {"a", "b", "c"}, g, roots, {}) == NameSet{"a", "b"});
  CHECK(active_variable_filter({"c"}, {"a", "b", "c", "new"}, g, roots, {}) == NameSet{"c", "new"});
}

TEST_CASE("empty accessed set writes only a manifest") {
  Fig4 f;
  Store s = mem_store();
  s.save(f.g, {});
  const std::uint64_t pods = s.backend().pods_written();
  SaveStats st;
  s.save(f.g, {}, &st);
  CHECK(st.active_variables == 0);
  CHECK(st.pods_total == 0);
  CHECK(s.backend().pods_written() == pods);
  CHECK(st.manifest_bytes > 0);
  CHECK(s.load(all_names(f.g), 2).variables().size() == 5);
  CHECK(canonical_serialize(s.load(all_names(f.g), 2)) == canonical_serialize(f.g));
}

TEST_CASE("unchanged active save writes no pods") {
  Fig4 f;
  Store s = mem_store();
  s.save(f.g, {});
  const std::uint64_t pods = s.backend().pods_written();
  SaveStats st;
  s.save(f.g, all_names(f.g), &st);
  CHECK(st.active_variables == 5);
  CHECK(st.pods_written == 0);
  CHECK(st.pods_skipped == st.pods_total);
  CHECK(s.backend().pods_written() == pods);
}

TEST_CASE("a local mutation rewrites only its component") {
  ObjectGraph ns;
  execute_statement(ns, MakeLists{"x", 10, 5, 20}, 1);
  execute_statement(ns, MakeLists{"y", 10, 5, 20}, 2);
  Store s = mem_store();
  s.save(ns, {});
  const ObjectIdSet y_objects = reachable_from(ns, {"y"});
  execute_statement(ns, MutateFraction{"x", 0.1, 3}, 4);
  ns.collect_garbage();
  SaveStats st;
  s.save(ns, {"x"}, &st);
  CHECK(st.active_variables == 1);
  CHECK(st.carried_variables == 1);
  CHECK(st.pods_written >= 1);
  CHECK(st.pods_written < st.pods_total);
  const SaveManifest m = s.manifest(2);
  CHECK(m.carried_forward.contains("y"));
  CHECK(m.carried_forward.at("y").origin == 1);
  CHECK(canonical_serialize(s.load({"y"}, 2)) == canonical_serialize(ns, {"y"}));
  CHECK(canonical_serialize(s.load({"x", "y"}, 2)) == canonical_serialize(ns));
}

TEST_CASE("fresh variables are written") {
  Store s = mem_store();
  ObjectGraph ns;
  execute_statement(ns, MakeLists{"a", 3, 3, 3}, 1);
  s.save(ns, {"a"});
  execute_statement(ns, MakeLists{"b", 4, 4, 4}, 2);
  SaveStats st;
  s.save(ns, {"b"}, &st);
  CHECK(st.active_variables == 1);
  CHECK(st.pods_written == st.pods_total);
}

TEST_CASE("load returns the state at t") {
  Store s = mem_store();
  ObjectGraph ns;
  execute_statement(ns, MakeLists{"d", 6, 4, 16}, 1);
  s.save(ns, {});
  const Bytes t1 = canonical_serialize(ns);
  execute_statement(ns, MutateFraction{"d", 0.5, 2}, 2);
  execute_statement(ns, AppendLeaf{"d", 30}, 3);
  ns.collect_garbage();
  s.save(ns, {"d"});
  CHECK(canonical_serialize(s.load({"d"}, 1)) == t1);
  CHECK(canonical_serialize(s.load({"d"}, 2)) == canonical_serialize(ns));
  CHECK(s.list_time_ids() == std::vector<TimeId>{1, 2});
  CHECK(s.load({}, 1).variables().empty());
  CHECK(code_of([&] { s.load({"d"}, 9); }) == ErrorCode::kUnknownTimeId);
  CHECK(code_of([&] { s.load({"nope"}, 1); }) == ErrorCode::kUnknownVariable);
}

TEST_CASE("deleted variables are unknown afterwards") {
  Store s = mem_store();
  ObjectGraph ns;
  execute_statement(ns, MakeLists{"a", 1, 1, 1}, 1);
  execute_statement(ns, MakeLists{"b", 1, 1, 1}, 2);
  s.save(ns, {});
  ns.unbind("b");
  ns.collect_garbage();
  s.save(ns, {});
  CHECK(s.load({"b"}, 1).has_variable("b"));
  CHECK(code_of([&] { s.load({"b"}, 2); }) == ErrorCode::kUnknownVariable);
}

TEST_CASE("aliases load as one shared object") {
  Store s = mem_store();
  ObjectGraph ns;
  execute_statement(ns, MakeLists{"x", 2, 2, 2}, 1);
  execute_statement(ns, Assign{"y", "x"}, 2);
  s.save(ns, {});
  ObjectGraph loaded = s.load({"x", "y"}, 1);
  CHECK(loaded.lookup("x") == loaded.lookup("y"));
  // Mutating the loaded x is visible through y.
  execute_statement(loaded, AppendLeaf{"x", 5}, 3);
  CHECK(loaded.node(loaded.lookup("y")).children.size() == 3);
  // Aliases split across save times still share.
  execute_statement(ns, Read{"x"}, 4);
  s.save(ns, {"x"});
  ObjectGraph later = s.load({"x", "y"}, 2);
  CHECK(later.lookup("x") == later.lookup("y"));
}

TEST_CASE("directory store reopens") {
  const fs::path root =
      fs::temp_directory_path() / ("podstore_store_" + std::to_string(::getpid()));
  fs::remove_all(root);
  ObjectGraph ns;
  execute_statement(ns, MakeLists{"d", 5, 5, 10}, 1);
  execute_statement(ns, MakeLists{"e", 2, 2, 10}, 2);
  {
    Store s({}, make_backend("dir", root.string()));
    s.save(ns, {});
    CHECK(fs::exists(root / "store.meta"));
    CHECK(s.backend().audit_bytes() ==
          s.backend().pod_bytes_written() + s.backend().manifest_bytes_written());
  }
  const Bytes t1 = canonical_serialize(ns);
  {
    Store s({}, make_backend("dir", root.string()));
    CHECK(canonical_serialize(s.load({"d", "e"}, 1)) == t1);
    execute_statement(ns, MutateFraction{"d", 0.4, 7}, 3);
    ns.collect_garbage();
    CHECK(s.save(ns, {"d"}) == 2);
    CHECK(canonical_serialize(s.load({"d", "e"}, 2)) == canonical_serialize(ns));
    CHECK(canonical_serialize(s.load({"d", "e"}, 1)) == t1);
  }
  fs::remove_all(root);
}

TEST_CASE("digest collisions surface on load") {
  StoreConfig c;
  c.digest_mode = DigestMode::kTruncated8;
  c.optimizer = "split-all";
  Store s = mem_store(c);
  ObjectGraph ns;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 400; ++i) {
    Bytes b(12);
    for (auto& x : b) x = static_cast<std::uint8_t>(rng());
    ns.bind("v" + std::to_string(i), ns.add_leaf(b));
  }
  s.save(ns, {});
  const ErrorCode code = code_of([&] { s.load(all_names(ns), 1); });
  CHECK((code == ErrorCode::kMalformedBytes || code == ErrorCode::kUnresolvedGlobalId));
}

TEST_CASE("carried references end at written pods") {
  std::mt19937_64 rng(4);
  RunOptions o;
  Harness h(o);
  for (const char* v : {"a", "b", "c"}) h.execute(MakeLists{v, 3, 3, 8});
  h.execute(Checkpoint{});
  for (int i = 0; i < 8; ++i) {
    const std::string v(1, static_cast<char>('a' + rng() % 3));
    h.execute(MutateFraction{v, 0.5, rng()});
    h.execute(Checkpoint{});
  }
  Store& s = h.store();
  for (TimeId t : s.list_time_ids()) {
    const SaveManifest m = s.manifest(t);
    for (const auto& [name, carried] : m.carried_forward) {
      const SaveManifest origin = s.manifest(carried.origin);
      CHECK(origin.variable_roots.at(name) == carried.ref);
      CHECK(s.backend().has_pod(s.detector().resolve(carried.ref.pod)));
    }
  }
}

TEST_CASE("property: every load matches the retained snapshot") {
  std::mt19937_64 rng(12);
  for (int w = 0; w < 12; ++w) {
    RunOptions o;
    o.keep_snapshots = true;
    o.store.optimizer = strategy_names()[rng() % 7];
    o.store.page_size = 1 + static_cast<std::uint32_t>(rng() % 64);
    o.seed = rng();
    Harness h(o);
    const std::vector<std::string> vars = {"a", "b", "c", "d"};
    for (const auto& v : vars) {
      h.execute(MakeLists{v, 1 + static_cast<std::uint32_t>(rng() % 5), 1 + static_cast<std::uint32_t>(rng() % 5), 8});
    }
    h.execute(Checkpoint{});
    for (int step = 0; step < 6; ++step) {
      for (int k = 0; k < 3; ++k) {
        const std::string& v = vars[rng() % vars.size()];
        switch (rng() % 5) {
          case 0: h.execute(MutateFraction{v, unit(rng), rng()}); break;
          case 1: h.execute(AppendLeaf{v, static_cast<std::uint32_t>(rng() % 40)}); break;
          case 2: h.execute(Assign{vars[rng() % vars.size()], v}); break;
          case 3: h.execute(MakeLists{v, 2, 2, 4}); break;
          default: h.execute(Head{v, 2}); break;
        }
      }
      h.execute(Checkpoint{});
    }
    const auto times = h.store().list_time_ids();
    for (TimeId t : times) {
      NameSet names;
      for (const auto& [n, id] : h.snapshots().at(t).variables()) {
        if (rng() % 3) names.insert(n);
      }
      CHECK(h.verify_load(names, t));
    }
    RunMetrics m = h.finish();
    CHECK(m.audit_bytes == m.storage_bytes);
  }
}

TEST_CASE("no false negatives: changed variables are re-podded") {
  std::mt19937_64 rng(13);
  for (int w = 0; w < 10; ++w) {
    ObjectGraph ns;
    Store s = mem_store();
    const std::vector<std::string> vars = {"a", "b", "c"};
    for (const auto& v : vars) execute_statement(ns, MakeLists{v, 3, 3, 6}, rng());
    s.save(ns, {});
    for (int step = 0; step < 5; ++step) {
      std::map<std::string, Bytes> before;
      for (const auto& v : vars) before[v] = canonical_serialize(ns, {v});
      NameSet accessed;
      const std::string& v = vars[rng() % 3];
      EffectRecord fx = execute_statement(ns, MutateFraction{v, unit(rng), rng()}, rng());
      accessed.insert(fx.accessed.begin(), fx.accessed.end());
      ns.collect_garbage();
      s.prune(ns);
      const TimeId t = s.save(ns, accessed);
      const SaveManifest m = s.manifest(t);
      for (const auto& name : vars) {
        if (canonical_serialize(ns, {name}) != before[name]) {
          // A changed variable must have been re-podded at t.
          CHECK(m.variable_roots.contains(name));
        }
      }
      if (!fx.mutated_objects.empty()) CHECK(!m.digests.empty());
    }
  }
}
