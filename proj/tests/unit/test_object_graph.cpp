#include "doctest.h"
#include "helpers.hpp"
#include "podstore/bench.hpp"
#include "podstore/error.hpp"

using namespace podstore;
using namespace podstore::testing;

TEST_CASE("object_size") {
  ObjectNode leaf{ObjectId{1}, ObjectKind::kLeaf, Bytes(100), {}};
  CHECK(object_size(leaf) == 116);
  ObjectNode c{ObjectId{2}, ObjectKind::kContainer, {}, {ObjectId{1}, ObjectId{1}, ObjectId{1}}};
  CHECK(object_size(c) == 40);
  ObjectNode empty{ObjectId{3}, ObjectKind::kLeaf, {}, {}};
  CHECK(object_size(empty) == 16);
}

TEST_CASE("reachable_from on the notebook graph") {
  Fig4 f;
  CHECK(reachable_from(f.g, {"fig"}) == ObjectIdSet{f.u[1], f.u[2], f.u[3], f.u[4], f.u[5]});
  CHECK(reachable_from(f.g, {}).empty());
  CHECK(reachable_from(f.g, {"model"}) == ObjectIdSet{f.u[8], f.u[9]});
  CHECK_THROWS_AS(reachable_from(f.g, {"nope"}), Error);
}

TEST_CASE("reachable_from chain") {
  ObjectGraph g;
  ObjectId c = g.add_leaf(bytes_of("c"));
  ObjectId b = g.add_container({}, {c});
  ObjectId a = g.add_container({}, {b});
  g.bind("a", a);
  CHECK(reachable_from(g, {"a"}) == ObjectIdSet{a, b, c});
}

TEST_CASE("connected_variables") {
  Fig4 f;
  CHECK(connected_variables(f.g, {"model"}) == NameSet{"dataset", "trainer", "model"});
  CHECK(connected_variables(f.g, {"fig"}) == NameSet{"fig", "ax"});
  ObjectGraph g;
  g.bind("x", g.add_leaf(bytes_of("x")));
  g.bind("y", g.add_leaf(bytes_of("y")));
  CHECK(connected_variables(g, {"x"}) == NameSet{"x"});
  try {
    connected_variables(g, {"z"});
    FAIL("expected UnknownVariable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnknownVariable);
  }
}

TEST_CASE("canonical_serialize determinism and sensitivity") {
  Fig4 f;
  const Bytes a = canonical_serialize(f.g);
  CHECK(a == canonical_serialize(f.g));
  f.g.mutable_node(f.u[9]).payload[0] ^= 1;
  CHECK(a != canonical_serialize(f.g));
}

TEST_CASE("canonical_serialize ignores object ids") {
  Fig4 f;
  ObjectGraph h;
  // Burn ids so every node gets a different id than in f.
  for (int i = 0; i < 7; ++i) h.add_leaf({});
  std::map<int, ObjectId> v;
  for (int i = 9; i >= 1; --i) v[i] = h.create(f.g.node(f.u[i]).kind, f.g.node(f.u[i]).payload);
  for (int i = 1; i <= 9; ++i) {
    std::vector<ObjectId> kids;
    for (ObjectId c : f.g.node(f.u[i]).children) {
      for (int j = 1; j <= 9; ++j) {
        if (f.u[j] == c) kids.push_back(v[j]);
      }
    }
    if (!kids.empty()) h.set_children(v[i], kids);
  }
  for (const auto& [name, id] : f.g.variables()) {
    for (int j = 1; j <= 9; ++j) {
      if (f.u[j] == id) h.bind(name, v[j]);
    }
  }
  h.collect_garbage();
  CHECK(canonical_serialize(h) == canonical_serialize(f.g));
  CHECK(canonical_serialize(h, {"model"}) == canonical_serialize(f.g, {"model"}));
}

TEST_CASE("aliasing is visible to the serializer") {
  // x and y share a list versus two equal copies.
  ObjectGraph shared;
  ObjectId l = shared.add_container({}, {shared.add_leaf(bytes_of("q"))});
  shared.bind("x", l);
  shared.bind("y", l);
  ObjectGraph copies;
  copies.bind("x", copies.add_container({}, {copies.add_leaf(bytes_of("q"))}));
  copies.bind("y", copies.add_container({}, {copies.add_leaf(bytes_of("q"))}));
  CHECK(canonical_serialize(shared) != canonical_serialize(copies));
}

TEST_CASE("property: reachability and components") {
  std::mt19937_64 rng(11);
  GraphGenOptions o;
  o.max_nodes = 300;
  for (int t = 0; t < 200; ++t) {
    ObjectGraph g = random_graph(rng, o);
    std::vector<std::string> names;
    for (const auto& [n, id] : g.variables()) names.push_back(n);
    NameSet a, b;
    for (const auto& n : names) {
      if (rng() % 3 == 0) a.insert(n);
      if (a.contains(n) || rng() % 2 == 0) b.insert(n);
    }
    const ObjectIdSet ra = reachable_from(g, a);
    const ObjectIdSet rb = reachable_from(g, b);
    CHECK(ra == bfs_oracle(g, a));
    CHECK(std::includes(rb.begin(), rb.end(), ra.begin(), ra.end()));
    const NameSet comp = connected_variables(g, a);
    CHECK(std::includes(comp.begin(), comp.end(), a.begin(), a.end()));
    CHECK(connected_variables(g, comp) == comp);
    // Components never pull in a variable whose closure is disjoint from
    // every other closure in the component.
    for (const auto& n : comp) {
      if (a.contains(n)) continue;
      const ObjectIdSet rn = reachable_from(g, {n});
      bool touches = false;
      for (const auto& m : comp) {
        if (m == n) continue;
        const ObjectIdSet rm = reachable_from(g, {m});
        for (ObjectId id : rn) touches = touches || rm.contains(id);
      }
      CHECK(touches);
    }
  }
}

TEST_CASE("collect_garbage drops unreachable nodes") {
  ObjectGraph g;
  ObjectId keep = g.add_leaf(bytes_of("k"));
  g.add_leaf(bytes_of("drop"));
  g.bind("k", keep);
  const std::size_t before = g.node_count();
  CHECK(g.collect_garbage() == 1);
  CHECK(g.node_count() == before - 1);
  g.validate();
}
