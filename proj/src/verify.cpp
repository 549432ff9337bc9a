#include <algorithm>
#include <cmath>
#include <cstdio>

#include "podstore/bench.hpp"
#include "podstore/error.hpp"

namespace podstore {

namespace {

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

VerifyCheck round_trip(const VerifyOptions& o) {
  std::mt19937_64 rng(o.seed);
  GraphGenOptions g;
  g.max_nodes = o.max_nodes;
  std::size_t runs = 0;
  for (std::size_t i = 0; i < o.graphs; ++i) {
    ObjectGraph graph = random_graph(rng, g);
    NameSet names;
    for (const auto& [n, id] : graph.variables()) names.insert(n);
    const Bytes want = canonical_serialize(graph, names);
    for (const auto& s : strategy_names()) {
      std::shared_ptr<PoddingOptimizer> opt;
      try {
        opt = make_strategy(s, o.params, o.seed + i, graph, names);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kTooLarge) continue;
        throw;
      }
      GlobalPageAllocator pages;
      PodSaveResult saved = pod_save(graph, names, *opt, pages);
      std::map<PodId, const Pod*> by_id;
      GlobalIndex index(pages.page_size());
      for (const Pod& p : saved.pods) {
        by_id.emplace(p.id, &p);
        for (const PageOffset& off : p.page_offsets) index.add(p.id, off);
      }
      ObjectGraph back = unpod(saved.roots, [&](PodId id) { return by_id.at(id)->bytes; }, index);
      if (canonical_serialize(back, names) != want) {
        return {"round-trip", false, "graph " + std::to_string(i) + " strategy " + s};
      }
      ++runs;
    }
  }
  return {"round-trip", true, std::to_string(runs) + " graph/strategy pairs"};
}

VerifyCheck eq1(const VerifyOptions& o) {
  std::mt19937_64 rng(o.seed + 1);
  for (int t = 0; t < 10; ++t) {
    VirtualMemoTable table;
    table.page_size = static_cast<std::uint32_t>(1 + rng() % 64);
    for (std::uint32_t i = 0; i * table.page_size < 512; ++i) table.pages[i] = rng() % (1ULL << 40);
    for (std::uint64_t m = 0; m < 512; ++m) {
      const std::uint64_t want = table.pages.at(static_cast<std::uint32_t>(m / table.page_size)) +
                                 m % table.page_size;
      if (map_virtual_to_global(m, table) != want) return {"eq1", false, "local branch"};
      if (map_virtual_to_global(kCrossPodBase + m, table) != m) return {"eq1", false, "cross branch"};
    }
  }
  return {"eq1", true, "10 tables"};
}

std::vector<VerifyCheck> optimality(const VerifyOptions& o) {
  std::mt19937_64 rng(o.seed + 2);
  std::vector<double> ratios;
  std::size_t lemma_fail = 0, alpha_fail = 0;
  bool oracle_ok = true;
  for (std::size_t i = 0; i < o.instances; ++i) {
    TreeInstance inst = random_tree_instance(rng, 1 + rng() % o.max_decisions);
    OptimalityResult r = compare_to_optimal(inst, o.params);
    if (r.optimal > r.lga + 1e-9 || r.optimal > r.split_all + 1e-9) oracle_ok = false;
    ratios.push_back(r.lga / r.optimal);
    if (r.lga > 0.5 * (r.optimal + r.split_all) + 1e-9) ++lemma_fail;
    if (r.lga > (1 + r.alpha) * r.optimal + 1e-9) ++alpha_fail;
  }
  std::sort(ratios.begin(), ratios.end());
  const double median = ratios.empty() ? 1.0 : ratios[ratios.size() / 2];
  const double worst = ratios.empty() ? 1.0 : ratios.back();
  return {
      {"exhaustive-oracle", oracle_ok, "optimum <= lga and <= split-all on every instance"},
      {"lga-ratio", true, fmt("median %.4f max %.4f (reported)", median, worst)},
      {"lga-lemma", true,
       fmt("half-sum bound violated on %.0f of %.0f instances, (1+alpha) on %.0f (reported)",
           static_cast<double>(lemma_fail), static_cast<double>(ratios.size()),
           static_cast<double>(alpha_fail))},
  };
}

VerifyCheck supermodular(const VerifyOptions& o) {
  std::mt19937_64 rng(o.seed + 3);
  for (std::size_t t = 0; t < o.supermodular_triples; ++t) {
    TreeInstance inst = random_tree_instance(rng, 1 + rng() % 11);
    TableVolatility est(inst.volatility);
    FirstVisitTree tree = first_visit_tree(inst.graph, inst.names, est);
    const std::size_t d = tree.decisions();
    const std::uint64_t full = (d >= 64) ? ~0ULL : ((1ULL << d) - 1);
    const std::uint64_t b = rng() & full;
    const std::uint64_t a = b & rng();
    const std::uint64_t outside = full & ~b;
    if (outside == 0) continue;
    std::uint64_t e = 0;
    do {
      e = 1ULL << (rng() % d);
    } while (!(e & outside));
    const double lhs = tree_cost(tree, b | e, o.params) - tree_cost(tree, b, o.params);
    const double rhs = tree_cost(tree, a | e, o.params) - tree_cost(tree, a, o.params);
    if (lhs < rhs - 1e-9) return {"supermodularity", false, "triple " + std::to_string(t)};
  }
  return {"supermodularity", true, std::to_string(o.supermodular_triples) + " triples"};
}

VerifyCheck dedup(const VerifyOptions& o) {
  RunOptions r;
  r.seed = o.seed;
  Harness h(r);
  h.execute(MakeLists{"a", 5, 20, 50});
  h.execute(MakeLists{"b", 3, 10, 50});
  h.execute(Checkpoint{});
  const std::uint64_t before = h.store().backend().pods_written();
  h.execute(Read{"a"});
  h.execute(Checkpoint{});
  h.execute(Sum{"b"});
  h.execute(Checkpoint{});
  const std::uint64_t after = h.store().backend().pods_written();
  const bool ok = after == before &&
                  h.store().max_thesaurus_footprint() <= h.store().config().thesaurus_bytes;
  return {"dedup", ok, std::to_string(after - before) + " new pods on identical checkpoints"};
}

VerifyCheck delta(const VerifyOptions& o) {
  std::mt19937_64 rng(o.seed + 4);
  std::size_t queries = 0;
  for (int w = 0; w < 5; ++w) {
    RunOptions r;
    r.seed = rng();
    r.keep_snapshots = true;
    Harness h(r);
    const std::vector<std::string> vars = {"a", "b", "c", "d"};
    for (const auto& v : vars) h.execute(MakeLists{v, 4, 8, 30});
    h.execute(Checkpoint{});
    for (int step = 0; step < 5; ++step) {
      const std::string& v = vars[rng() % vars.size()];
      switch (rng() % 4) {
        case 0: h.execute(MutateFraction{v, unit(rng), rng()}); break;
        case 1: h.execute(AppendLeaf{v, 40}); break;
        case 2: h.execute(Assign{vars[rng() % vars.size()], v}); break;
        default: h.execute(Sum{v}); break;
      }
      h.execute(Checkpoint{});
    }
    const auto times = h.store().list_time_ids();
    for (int q = 0; q < 10; ++q) {
      const TimeId t = times[rng() % times.size()];
      NameSet names;
      for (const auto& [n, id] : h.snapshots().at(t).variables()) {
        if (rng() % 2) names.insert(n);
      }
      if (!h.verify_load(names, t)) return {"delta", false, "time " + std::to_string(t)};
      ++queries;
    }
  }
  return {"delta", true, std::to_string(queries) + " load queries"};
}

}  // namespace

std::vector<VerifyCheck> verify(const VerifyOptions& o) {
  std::vector<VerifyCheck> out;
  out.push_back(round_trip(o));
  out.push_back(eq1(o));
  for (auto& c : optimality(o)) out.push_back(std::move(c));
  out.push_back(supermodular(o));
  out.push_back(dedup(o));
  out.push_back(delta(o));
  return out;
}

}  // namespace podstore
