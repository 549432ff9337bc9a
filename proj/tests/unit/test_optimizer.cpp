#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "podstore/bench.hpp"
#include "podstore/error.hpp"
#include "podstore/optimizer.hpp"

using namespace podstore;
using namespace podstore::testing;

namespace {

// Independent pricing of a split mask: each node belongs to the pod of its
// nearest split ancestor (itself included), node 0 always heads a pod.
double oracle_cost(const FirstVisitTree& t, std::uint64_t mask, double c_pod) {
  const std::size_t n = t.sizes.size();
  std::vector<std::size_t> head(n, 0);
  for (std::size_t i = 1; i < n; ++i) {
    head[i] = (mask >> (i - 1)) & 1 ? i : head[static_cast<std::size_t>(t.parent[i])];
  }
  std::map<std::size_t, std::pair<double, double>> pods;
  for (std::size_t i = 0; i < n; ++i) {
    pods[head[i]].first += t.sizes[i];
    pods[head[i]].second += t.volatilities[i];
  }
  double cost = 0;
  for (const auto& [h, sv] : pods) cost += c_pod + sv.first * sv.second;
  return cost;
}

FirstVisitTree random_tree(std::mt19937_64& rng, std::size_t nodes) {
  FirstVisitTree t;
  for (std::size_t i = 0; i < nodes; ++i) {
    t.parent.push_back(i == 0 ? -1 : static_cast<int>(rng() % i));
    t.sizes.push_back(16.0 + static_cast<double>(rng() % 5000));
    t.volatilities.push_back(rng() % 3 == 0 ? 0.0 : unit(rng));
    t.ids.push_back(ObjectId{i + 1});
  }
  return t;
}

}  // namespace

TEST_CASE("expected_cost examples") {
  CostParams p{5.0, 3};
  const double s2[] = {10, 20}, l2[] = {0.1, 0.2};
  CHECK(expected_cost({{0, 1}}, s2, l2, p) == doctest::Approx(14.0));
  CHECK(expected_cost({}, s2, l2, p) == 0.0);
  const double s[] = {10, 10}, l[] = {0.1, 0.1};
  CHECK(expected_cost({{0}, {1}}, s, l, p) == doctest::Approx(12.0));
  try {
    expected_cost({{0, 1}, {1}}, s, l, p);
    FAIL("expected OverlappingPods");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kOverlappingPods);
  }
}

TEST_CASE("delta_bundle and delta_split") {
  CHECK(delta_bundle({30, 0.3, 0}, 10, 0.1) == doctest::Approx(7.0));
  CHECK(delta_bundle({30, 0.0, 0}, 10, 0.0) == 0.0);
  CHECK(delta_bundle({0, 0, 0}, 10, 0.5) == doctest::Approx(5.0));
  CHECK(delta_split(116, 0.1, {1200, 3}) == doctest::Approx(1211.6));
  CHECK(delta_split(116, 0.0, {1200, 3}) == 1200.0);
  CHECK(delta_split(10, 1.0, {5, 3}) == doctest::Approx(15.0));
}

TEST_CASE("lga_action") {
  DecisionMemo memo;
  const CostParams p{1200, 3};
  CHECK(lga_action(ObjectId{1}, {30, 0.3, 0}, p, 10, 0.1, &memo) == PoddingAction::kBundle);
  // delta_bundle = 19884 * 0.1 + 116 * 0.1 = 2000 >= 1211.6
  CHECK(lga_action(ObjectId{2}, {19884, 0.0, 3}, p, 116, 0.1, &memo) == PoddingAction::kSplitFinal);
  CHECK(lga_action(ObjectId{3}, {19884, 0.0, 2}, p, 116, 0.1, &memo) ==
        PoddingAction::kSplitContinue);
  memo.record(ObjectId{4}, PoddingAction::kSplitContinue);
  CHECK(lga_action(ObjectId{4}, {0, 0, 3}, p, 1, 0, &memo) == PoddingAction::kSplitContinue);
  // Memoized on first use.
  CHECK(lga_action(ObjectId{2}, {0, 0, 0}, p, 1, 0, &memo) == PoddingAction::kSplitFinal);
  // Tie goes to split: delta_bundle = 0 * 1 + 5 * 1 = 5 == c_pod 0 + 5 * 1.
  CHECK(lga_action(ObjectId{5}, {0, 0, 0}, {0, 3}, 5, 1.0, nullptr) ==
        PoddingAction::kSplitContinue);
}

TEST_CASE("baselines") {
  ObjectFeatures leaf{ObjectId{1}, ObjectKind::kLeaf, 20, 0, 4};
  ObjectFeatures box{ObjectId{2}, ObjectKind::kContainer, 40, 3, 0};
  BundleAll b;
  CHECK(b.decide(leaf, 0, {}) == PoddingAction::kBundle);
  SplitAll s;
  CHECK(s.decide(box, 0, {}) == PoddingAction::kSplitContinue);
  TypeBasedHeuristic tbh({{ObjectKind::kContainer, PoddingAction::kSplitContinue}});
  CHECK(tbh.decide(leaf, 0, {}) == PoddingAction::kBundle);
  CHECK(tbh.decide(box, 0, {}) == PoddingAction::kSplitContinue);
  RandomActions r1(9), r2(9);
  for (int i = 0; i < 100; ++i) CHECK(r1.decide(leaf, 0, {}) == r2.decide(leaf, 0, {}));
}

TEST_CASE("type catalog text") {
  TypeCatalog c = parse_type_catalog("# comment\nleaf split-final\ncontainer bundle\n");
  CHECK(c.at(ObjectKind::kLeaf) == PoddingAction::kSplitFinal);
  CHECK(c.at(ObjectKind::kContainer) == PoddingAction::kBundle);
  CHECK_THROWS_AS(parse_type_catalog("leaf explode"), Error);
}

TEST_CASE("estimators") {
  ObjectFeatures box{ObjectId{2}, ObjectKind::kContainer, 40, 3, 0};
  CHECK(ConstantVolatility(0).estimate(box) == 0.0);
  CHECK(ConstantVolatility(1).estimate(box) == 1.0);
  CHECK(ConstantVolatility(7).estimate(box) == 1.0);
  EmpiricalFrequency e;
  e.set_history(ObjectId{2}, {3, 8});
  CHECK(e.estimate(box) == doctest::Approx(0.4));
  CHECK(e.estimate({ObjectId{9}, ObjectKind::kLeaf, 1, 0, 0}) == doctest::Approx(0.5));
  FeatureHeuristic f;
  CHECK(f.estimate(box) == doctest::Approx(0.05 + 0.01 * std::log(41.0) + 0.02 * std::log(4.0)));
  CHECK(f.estimate({ObjectId{3}, ObjectKind::kLeaf, 116, 0, 100}) == 0.0);
  FeatureHeuristic g({0.05, 0.01, 0.02, false});
  CHECK(g.estimate({ObjectId{3}, ObjectKind::kLeaf, 116, 0, 100}) ==
        doctest::Approx(0.05 + 0.01 * std::log(117.0)));
}

TEST_CASE("exhaustive examples") {
  FirstVisitTree one;
  one.parent = {-1};
  one.sizes = {100};
  one.volatilities = {0.5};
  one.ids = {ObjectId{1}};
  CHECK(exhaustive_optimal(one, {3, 3}).cost == doctest::Approx(3 + 50));

  FirstVisitTree chain;
  chain.parent = {-1, 0};
  chain.sizes = {10, 10};
  chain.volatilities = {0, 1};
  chain.ids = {ObjectId{1}, ObjectId{2}};
  ExhaustiveResult r = exhaustive_optimal(chain, {1, 3});
  CHECK(r.cost == doctest::Approx(12));
  CHECK(r.split_mask == 1);
  CHECK(tree_cost(chain, 0, {1, 3}) == doctest::Approx(21));
}

TEST_CASE("exhaustive refuses large instances") {
  std::mt19937_64 rng(1);
  FirstVisitTree t = random_tree(rng, 30);
  try {
    exhaustive_optimal(t, {}, 20);
    FAIL("expected TooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTooLarge);
  }
}

TEST_CASE("property: exhaustive against brute-force pricing") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 100; ++t) {
    FirstVisitTree tree = random_tree(rng, 1 + rng() % 10);
    const CostParams p{static_cast<double>(rng() % 3000), 3};
    double best = std::numeric_limits<double>::infinity();
    for (std::uint64_t m = 0; m < (1ULL << tree.decisions()); ++m) {
      const double c = oracle_cost(tree, m, p.c_pod);
      CHECK(tree_cost(tree, m, p) == doctest::Approx(c));
      best = std::min(best, c);
    }
    CHECK(exhaustive_optimal(tree, p).cost == doctest::Approx(best));
    CHECK(best <= split_all_cost(tree, p) + 1e-9);
  }
}

TEST_CASE("property: exhaustive is no worse than any strategy on random 10-node trees") {
  std::mt19937_64 rng(4);
  const CostParams p;
  for (int t = 0; t < 40; ++t) {
    TreeInstance inst = random_tree_instance(rng, 9);
    OptimalityResult r = compare_to_optimal(inst, p);
    CHECK(r.decisions == 9);
    CHECK(r.optimal <= r.lga + 1e-9);
    CHECK(r.optimal <= r.split_all + 1e-9);
    TableVolatility est(inst.volatility);
    FirstVisitTree tree = first_visit_tree(inst.graph, inst.names, est);
    CHECK(r.optimal <= tree_cost(tree, 0, p) + 1e-9);
    for (int k = 0; k < 5; ++k) {
      CHECK(r.optimal <= tree_cost(tree, rng() & ((1ULL << 9) - 1), p) + 1e-9);
    }
  }
}

TEST_CASE("property: supermodularity") {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 2000; ++t) {
    FirstVisitTree tree = random_tree(rng, 2 + rng() % 11);
    const CostParams p{static_cast<double>(rng() % 2000), 3};
    const std::size_t d = tree.decisions();
    const std::uint64_t full = (1ULL << d) - 1;
    const std::uint64_t b = rng() & full;
    const std::uint64_t a = b & rng();
    if ((full & ~b) == 0) continue;
    std::uint64_t e;
    do {
      e = 1ULL << (rng() % d);
    } while (e & b);
    const double fb = oracle_cost(tree, b | e, p.c_pod) - oracle_cost(tree, b, p.c_pod);
    const double fa = oracle_cost(tree, a | e, p.c_pod) - oracle_cost(tree, a, p.c_pod);
    CHECK(fb >= fa - 1e-9);
  }
}

TEST_CASE("approximation alpha") {
  FirstVisitTree t;
  t.parent = {-1, 0};
  t.sizes = {100, 300};
  t.volatilities = {0.5, 0.1};
  t.ids = {ObjectId{1}, ObjectId{2}};
  // gamma = (50 + 30) / 2 = 40, mu_s = 200, mu_l = 0.3
  const double a = std::min(1200.0 / 80.0, std::sqrt(1200.0 / (16 * 200 * 0.3)));
  CHECK(approximation_alpha(t, {1200, 3}) == doctest::Approx(a));
}

TEST_CASE("lga is deterministic and stable under its memo") {
  std::mt19937_64 rng(8);
  GraphGenOptions o;
  o.max_nodes = 500;
  for (int t = 0; t < 20; ++t) {
    ObjectGraph g = random_graph(rng, o);
    NameSet names;
    for (const auto& [n, id] : g.variables()) names.insert(n);
    auto run = [&](std::shared_ptr<DecisionMemo> memo) {
      LearnedGreedy lga({}, std::make_shared<FeatureHeuristic>(), memo);
      GlobalPageAllocator pages;
      return pod_save(g, names, lga, pages);
    };
    PodSaveResult a = run(std::make_shared<DecisionMemo>());
    PodSaveResult b = run(std::make_shared<DecisionMemo>());
    REQUIRE(a.pods.size() == b.pods.size());
    for (std::size_t i = 0; i < a.pods.size(); ++i) CHECK(a.pods[i].members == b.pods[i].members);

    // With a shared memo the second save repeats every action even after
    // the graph grows.
    auto memo = std::make_shared<DecisionMemo>();
    PodSaveResult first = run(memo);
    ObjectId extra = g.add_leaf(Bytes(3000));
    g.bind("zz_extra", extra);
    names.insert("zz_extra");
    PodSaveResult second = run(memo);
    for (const auto& [id, action] : first.actions) {
      auto it = second.actions.find(id);
      if (it != second.actions.end()) CHECK(it->second == action);
    }
  }
}
