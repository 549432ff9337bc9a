#include "podstore/store.hpp"

#include <chrono>
#include <numeric>
#include <sstream>

#include "podstore/error.hpp"

namespace podstore {

const std::vector<std::string>& strategy_names() {
  static const std::vector<std::string> names = {"bundle-all", "split-all", "random", "tbh",
                                                 "lga-0",      "lga-1",     "lga",    "exhaustive"};
  return names;
}

bool is_strategy(const std::string& name) {
  const auto& n = strategy_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

std::string describe(const StoreConfig& c) {
  std::ostringstream out;
  out << "optimizer=" << c.optimizer << "\n"
      << "estimator=" << c.estimator << "\n"
      << "c_pod=" << c.params.c_pod << "\n"
      << "max_pod_depth=" << c.params.max_pod_depth << "\n"
      << "page_size=" << c.page_size << "\n"
      << "thesaurus_bytes=" << c.thesaurus_bytes << "\n"
      << "digest=" << (c.digest_mode == DigestMode::kXxh3 ? "xxh3-128" : "xxh3-trunc8") << "\n"
      << "seed=" << c.seed << "\n"
      << "filter_active=" << (c.filter_active ? 1 : 0) << "\n";
  return out.str();
}

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

 private:
  std::vector<std::size_t> parent_;
};

// Connected components of `g` minus `excluded`, as pod -> representative.
std::map<PodId, std::size_t> components(const PodGraph& g, const std::set<PodId>& excluded) {
  std::map<PodId, std::size_t> index;
  for (PodId p : g.pods) {
    if (!excluded.contains(p)) index.emplace(p, index.size());
  }
  DisjointSets sets(index.size());
  for (const auto& [a, b] : g.edges) {
    auto ia = index.find(a);
    auto ib = index.find(b);
    if (ia != index.end() && ib != index.end()) sets.unite(ia->second, ib->second);
  }
  for (auto& [p, i] : index) i = sets.find(i);
  return index;
}

}  // namespace

NameSet active_variable_filter(const NameSet& accessed, const NameSet& names,
                               const PodGraph& prior,
                               const std::map<std::string, PodId>& prior_roots,
                               const std::set<PodId>& excluded) {
  const auto comp = components(prior, excluded);
  auto comp_of = [&](const std::string& name) -> std::optional<std::size_t> {
    auto r = prior_roots.find(name);
    if (r == prior_roots.end()) return std::nullopt;
    auto c = comp.find(r->second);
    if (c == comp.end()) return std::nullopt;
    return c->second;
  };

  std::set<std::size_t> hot;
  NameSet active;
  for (const auto& name : accessed) {
    if (!names.contains(name)) continue;
    active.insert(name);
    if (auto c = comp_of(name)) hot.insert(*c);
  }
  for (const auto& name : names) {
    auto c = comp_of(name);
    if (!c || hot.contains(*c)) active.insert(name);
  }
  return active;
}

Store::Store(StoreConfig config, std::unique_ptr<Backend> backend)
    : config_(std::move(config)),
      backend_(std::move(backend)),
      detector_(config_.thesaurus_bytes, digest_function(config_.digest_mode)),
      allocator_(config_.page_size),
      memo_(std::make_shared<DecisionMemo>()) {
  if (!backend_) throw Error(ErrorCode::kInvalidArgument, "store needs a backend");
  if (!is_strategy(config_.optimizer)) {
    throw Error(ErrorCode::kInvalidArgument, "unknown optimizer '" + config_.optimizer + "'");
  }
  if (config_.estimator == "feature") {
    estimator_ = std::make_shared<FeatureHeuristic>();
  } else if (config_.estimator == "empirical") {
    estimator_ = std::make_shared<EmpiricalFrequency>();
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown estimator '" + config_.estimator + "'");
  }

  const std::string& o = config_.optimizer;
  if (o == "bundle-all") {
    persistent_optimizer_ = std::make_shared<BundleAll>();
  } else if (o == "split-all") {
    persistent_optimizer_ = std::make_shared<SplitAll>();
  } else if (o == "random") {
    persistent_optimizer_ = std::make_shared<RandomActions>(config_.seed);
  } else if (o == "tbh") {
    persistent_optimizer_ = std::make_shared<TypeBasedHeuristic>(config_.catalog);
  } else if (o == "lga") {
    persistent_optimizer_ = std::make_shared<LearnedGreedy>(config_.params, estimator_, memo_);
  } else if (o == "lga-0") {
    persistent_optimizer_ = std::make_shared<LearnedGreedy>(
        config_.params, std::make_shared<ConstantVolatility>(0.0), memo_, "lga-0");
  } else if (o == "lga-1") {
    persistent_optimizer_ = std::make_shared<LearnedGreedy>(
        config_.params, std::make_shared<ConstantVolatility>(1.0), memo_, "lga-1");
  } else if (o != "exhaustive") {
    throw Error(ErrorCode::kInvalidArgument, "unknown optimizer '" + o + "'");
  }
  if (config_.params.c_pod <= 0 || config_.params.max_pod_depth < 1) {
    throw Error(ErrorCode::kInvalidArgument, "c_pod must be > 0 and max_pod_depth >= 1");
  }

  restore_from_backend();
  if (next_time_ == 1) backend_->write_meta(describe(config_));
}

void Store::restore_from_backend() {
  const auto times = backend_->list_time_ids();
  if (times.empty()) return;
  for (PodId p : backend_->list_pods()) detector_.mark_written(p);
  std::uint64_t floor = 0;
  for (TimeId t : times) {
    SaveManifest m = read_manifest(*backend_, t);
    for (const auto& [syn, canon] : m.synonyms) detector_.synonyms().link(syn, canon);
    for (const auto& [pod, pages] : m.page_tables) {
      for (const PageOffset& p : pages) floor = std::max(floor, p.delta + config_.page_size);
    }
  }
  allocator_.reserve(floor);
  const SaveManifest last = read_manifest(*backend_, times.back());
  for (const auto& [name, ref] : last.variable_roots) live_refs_[name] = {last.time_id, ref};
  for (const auto& [name, c] : last.carried_forward) live_refs_[name] = c;
  next_time_ = times.back() + 1;
}

NameSet Store::active_variables(const ObjectGraph& ns, const NameSet& accessed) const {
  NameSet names;
  for (const auto& [name, id] : ns.variables()) names.insert(name);
  if (!has_prior_ || !config_.filter_active) return names;
  std::map<std::string, PodId> roots;
  for (const auto& [name, c] : live_refs_) roots.emplace(name, c.ref.pod);
  return active_variable_filter(accessed, names, live_graph_, roots, root_pods_);
}

std::shared_ptr<PoddingOptimizer> Store::make_optimizer(const ObjectGraph& ns,
                                                        const NameSet& active) const {
  if (persistent_optimizer_) return persistent_optimizer_;
  return plan_exhaustive(ns, active, *estimator_, config_.params, config_.exhaustive_cap);
}

PreparedSave Store::prepare_save(const ObjectGraph& ns, const NameSet& accessed) {
  PreparedSave p;
  p.time_id = next_time_++;
  p.root = ns.root();
  for (const auto& [name, id] : ns.variables()) p.names.insert(name);
  p.active = active_variables(ns, accessed);
  for (const auto& name : p.active) p.active_targets.emplace(name, ns.lookup(name));
  for (const auto& name : p.names) {
    if (p.active.contains(name)) continue;
    auto it = live_refs_.find(name);
    if (it == live_refs_.end()) continue;
    const CarriedRef& c = it->second;
    const SaveManifest origin = manifest(c.origin);
    auto pt = origin.page_tables.find(c.ref.pod);
    if (pt == origin.page_tables.end()) continue;
    const std::uint32_t page = c.ref.member / origin.page_size;
    for (const PageOffset& off : pt->second) {
      if (off.page_index != page) continue;
      p.carried_roots.emplace(name, std::make_pair(ns.lookup(name),
                                                   off.delta + c.ref.member % origin.page_size));
    }
  }
  try {
    p.optimizer = make_optimizer(ns, p.active);
  } catch (...) {
    --next_time_;
    throw;
  }
  return p;
}

TimeId Store::commit_save(const PreparedSave& prepared, const NodeSource& source,
                          SaveStats* stats) {
  const auto start = std::chrono::steady_clock::now();
  const TimeId t = prepared.time_id;
  SaveStats s;
  s.time_id = t;
  s.active_variables = prepared.active.size();

  SaveManifest m;
  m.time_id = t;
  m.page_size = config_.page_size;

  PodSaveResult result;
  if (!prepared.active_targets.empty()) {
    PodSaveOptions opts;
    opts.time_id = t;
    opts.split_variable_roots = true;
    opts.carried_roots = prepared.carried_roots;
    result = pod_save(source, prepared.root, prepared.active_targets, *prepared.optimizer,
                      allocator_, opts);
  }

  const bool reuse_digest = config_.digest_mode == DigestMode::kXxh3;
  for (const Pod& pod : result.pods) {
    if (pod_hook_) pod_hook_(pod.id);
    CheckResult check = detector_.check_and_register(pod);
    max_footprint_ = std::max(max_footprint_, detector_.thesaurus().footprint_bytes());
    if (check.must_write) {
      backend_->write_pod(pod.id, pod.bytes);
      detector_.mark_written(pod.id);
      ++s.pods_written;
      s.pod_bytes_written += pod.bytes.size();
    } else {
      m.synonyms.emplace_back(pod.id, check.canonical);
      ++s.pods_skipped;
    }
    m.digests.emplace(pod.id, reuse_digest ? check.digest : xxh3_digest(pod.bytes));
    if (!pod.page_offsets.empty()) m.page_tables.emplace(pod.id, pod.page_offsets);
    for (ObjectId id : pod.members) prepared.optimizer->observe(id, check.must_write);
  }
  s.pods_total = result.pods.size();
  s.objects_podded = result.object_count;

  m.variable_roots = result.roots;
  m.pod_edges.assign(result.graph.edges.begin(), result.graph.edges.end());
  for (const auto& name : prepared.names) {
    if (prepared.active.contains(name)) continue;
    auto it = live_refs_.find(name);
    if (it == live_refs_.end()) {
      throw Error(ErrorCode::kUnknownVariable, "inactive variable '" + name + "' has no prior save");
    }
    m.carried_forward.emplace(name, it->second);
  }
  s.carried_variables = m.carried_forward.size();

  Bytes encoded = encode_manifest(m);
  backend_->write_manifest(t, encoded);
  s.manifest_bytes = encoded.size();
  {
    std::lock_guard lock(cache_mutex_);
    manifests_.emplace(t, std::move(m));
  }

  // Live pod graph: fresh pods of this save plus the untouched components of
  // carried-forward variables.
  if (!result.pods.empty()) {
    const PodId root_pod = result.pods.front().id;
    const auto comp = components(live_graph_, root_pods_);
    std::set<std::size_t> keep;
    for (const auto& name : prepared.names) {
      if (prepared.active.contains(name)) continue;
      auto c = comp.find(live_refs_.at(name).ref.pod);
      if (c != comp.end()) keep.insert(c->second);
    }
    PodGraph next;
    for (const auto& [pod, c] : comp) {
      if (keep.contains(c)) next.pods.insert(pod);
    }
    for (const auto& e : live_graph_.edges) {
      if (next.pods.contains(e.first) && next.pods.contains(e.second)) next.edges.insert(e);
    }
    for (PodId p : result.graph.pods) {
      if (p != root_pod) next.pods.insert(p);
    }
    for (const auto& e : result.graph.edges) {
      if (e.first != root_pod && e.second != root_pod) next.edges.insert(e);
    }
    live_graph_ = std::move(next);
  }
  std::map<std::string, CarriedRef> refs;
  for (const auto& name : prepared.names) {
    if (prepared.active.contains(name)) {
      refs.emplace(name, CarriedRef{t, result.roots.at(name)});
    } else {
      refs.emplace(name, live_refs_.at(name));
    }
  }
  live_refs_ = std::move(refs);
  has_prior_ = true;
  last_actions_ = std::move(result.actions);

  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (stats) *stats = s;
  return t;
}

TimeId Store::save(const ObjectGraph& ns, const NameSet& accessed, SaveStats* stats) {
  const auto start = std::chrono::steady_clock::now();
  PreparedSave p = prepare_save(ns, accessed);
  TimeId t = commit_save(p, [&](ObjectId id) { return ns.node(id); }, stats);
  if (stats) {
    stats->seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return t;
}

void Store::prune(const ObjectGraph& ns) {
  memo_->prune([&](ObjectId id) { return ns.contains(id); });
  allocator_.prune([&](ObjectId id) { return ns.contains(id); });
}

SaveManifest Store::manifest(TimeId t) const {
  {
    std::lock_guard lock(cache_mutex_);
    if (auto it = manifests_.find(t); it != manifests_.end()) return it->second;
  }
  SaveManifest m;
  try {
    m = read_manifest(*backend_, t);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kNotFound) {
      throw Error(ErrorCode::kUnknownTimeId, "no save with time id " + std::to_string(t));
    }
    throw;
  }
  std::lock_guard lock(cache_mutex_);
  return manifests_.emplace(t, std::move(m)).first->second;
}

ObjectGraph Store::load(const NameSet& names, TimeId t) const {
  ObjectGraph out;
  load_into(out, names, t);
  return out;
}

void Store::load_into(ObjectGraph& out, const NameSet& names, TimeId t) const {
  last_fetches_ = 0;
  const SaveManifest at = manifest(t);
  std::map<TimeId, std::map<std::string, MemberRef>> by_origin;
  for (const auto& name : names) {
    if (auto it = at.variable_roots.find(name); it != at.variable_roots.end()) {
      by_origin[t].emplace(name, it->second);
    } else if (auto c = at.carried_forward.find(name); c != at.carried_forward.end()) {
      by_origin[c->second.origin].emplace(name, c->second.ref);
    } else {
      throw Error(ErrorCode::kUnknownVariable,
                  "variable '" + name + "' not present at time " + std::to_string(t));
    }
  }

  for (const auto& [origin, roots] : by_origin) {
    const SaveManifest m = origin == t ? at : manifest(origin);
    const std::map<PodId, PodId> synonyms(m.synonyms.begin(), m.synonyms.end());
    auto fetch = [&](PodId id) -> Bytes {
      auto d = m.digests.find(id);
      if (d == m.digests.end()) {
        throw Error(ErrorCode::kMissingPod, "pod " + to_string(id) + " is not part of save " +
                                                std::to_string(origin));
      }
      auto syn = synonyms.find(id);
      const PodId stored = syn == synonyms.end() ? id : syn->second;
      Bytes bytes;
      try {
        bytes = backend_->read_pod(stored);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kNotFound) {
          throw Error(ErrorCode::kMissingPod, "pod " + to_string(stored) + " is missing");
        }
        throw;
      }
      ++last_fetches_;
      if (xxh3_digest(bytes) != d->second) {
        throw Error(ErrorCode::kMalformedBytes,
                    "bytes of pod " + to_string(stored) + " do not match the digest of " +
                        to_string(id));
      }
      return bytes;
    };
    unpod_into(out, roots, fetch, m.global_index(), &m.page_tables);
  }
}

}  // namespace podstore
