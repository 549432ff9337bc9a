#include "podstore/podder.hpp"

#include <algorithm>

#include "podstore/error.hpp"
#include "wire.hpp"

namespace podstore {

std::string to_string(PodId id) {
  return std::to_string(id.time_id) + "_" + std::to_string(id.serial);
}

VirtualMemoTable VirtualMemoTable::from_deltas(std::uint32_t page_size,
                                               const std::vector<std::uint64_t>& deltas) {
  VirtualMemoTable t;
  t.page_size = page_size;
  for (std::uint32_t i = 0; i < deltas.size(); ++i) t.pages.emplace(i, deltas[i]);
  return t;
}

std::uint64_t map_virtual_to_global(std::uint64_t m_virtual, const VirtualMemoTable& table) {
  if (m_virtual >= kCrossPodBase) return m_virtual - kCrossPodBase;
  if (table.page_size == 0) throw Error(ErrorCode::kInvalidArgument, "page size is zero");
  const std::uint64_t i = m_virtual / table.page_size;
  const std::uint64_t r = m_virtual % table.page_size;
  auto it = table.pages.find(static_cast<std::uint32_t>(i));
  if (it == table.pages.end()) {
    throw Error(ErrorCode::kPageNotAllocated, "page " + std::to_string(i) + " is not allocated");
  }
  return it->second + r;
}

GlobalPageAllocator::GlobalPageAllocator(std::uint32_t page_size) : page_size_(page_size) {
  if (page_size_ == 0) throw Error(ErrorCode::kInvalidArgument, "page size must be positive");
}

std::uint64_t GlobalPageAllocator::page(ObjectId head, std::uint32_t page_index) {
  auto [it, inserted] = pages_.try_emplace({head, page_index}, next_);
  if (inserted) next_ += page_size_;
  return it->second;
}

// --- encoding --------------------------------------------------------------

namespace {
constexpr std::string_view kPodMagic = "POD1";
}

Bytes encode_pod(std::span<const ObjectNode> members, const ChildResolver& resolve_child,
                 std::span<const PageOffset> pages) {
  if (members.size() >= kCrossPodBase) {
    throw Error(ErrorCode::kTooManyLocalMembers,
                "pod has " + std::to_string(members.size()) + " members");
  }
  wire::Writer w;
  w.raw(kPodMagic);
  w.u32(static_cast<std::uint32_t>(members.size()));
  for (const ObjectNode& m : members) {
    w.u8(static_cast<std::uint8_t>(m.kind));
    w.blob(m.payload);
    w.u32(static_cast<std::uint32_t>(m.children.size()));
    for (ObjectId c : m.children) w.u32(resolve_child(c));
  }
  w.u32(static_cast<std::uint32_t>(pages.size()));
  for (const PageOffset& p : pages) {
    w.u32(p.page_index);
    w.u64(p.delta);
  }
  return w.take();
}

DecodedPod decode_pod(std::span<const std::uint8_t> bytes) {
  wire::Reader r(bytes, ErrorCode::kMalformedBytes);
  auto magic = r.raw(kPodMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kPodMagic.begin())) r.fail("bad pod magic");
  DecodedPod pod;
  const std::uint32_t count = r.u32();
  // Every member needs at least 9 bytes; reject absurd counts before reserving.
  if (count > r.remaining() / 9) r.fail("member count exceeds pod size");
  pod.members.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    DecodedMember m;
    std::uint8_t kind = r.u8();
    if (kind > 1) r.fail("unknown object kind");
    m.kind = static_cast<ObjectKind>(kind);
    m.payload = r.blob();
    std::uint32_t children = r.u32();
    if (children > r.remaining() / 4) r.fail("child count exceeds pod size");
    if (m.kind == ObjectKind::kLeaf && children != 0) r.fail("leaf with children");
    m.children.reserve(children);
    for (std::uint32_t c = 0; c < children; ++c) m.children.push_back(r.u32());
    pod.members.push_back(std::move(m));
  }
  std::uint32_t page_count = r.u32();
  if (page_count > r.remaining() / 12) r.fail("page count exceeds pod size");
  for (std::uint32_t i = 0; i < page_count; ++i) {
    PageOffset p;
    p.page_index = r.u32();
    p.delta = r.u64();
    pod.pages.push_back(p);
  }
  if (!r.done()) r.fail("trailing bytes after pod");
  return pod;
}

// --- podding ---------------------------------------------------------------

namespace {

struct PodBuild {
  std::vector<ObjectNode> members;
  PodStats stats;
  bool final = false;
};

struct Placement {
  std::uint32_t pod;
  std::uint32_t local;
};

}  // namespace

PodSaveResult pod_save(const NodeSource& source, ObjectId root_id,
                       const std::map<std::string, ObjectId>& root_targets,
                       PoddingOptimizer& optimizer, GlobalPageAllocator& pages,
                       const PodSaveOptions& options) {
  PodSaveResult result;
  std::vector<PodBuild> builds;
  std::unordered_map<ObjectId, Placement, ObjectIdHash> placed;

  ObjectNode root{root_id, ObjectKind::kContainer, {}, {}};
  std::unordered_map<ObjectId, std::uint64_t, ObjectIdHash> external;
  {
    std::map<std::string, ObjectId> all = root_targets;
    for (const auto& [name, ref] : options.carried_roots) {
      if (all.emplace(name, ref.first).second) external.emplace(ref.first, ref.second);
    }
    for (const auto& [name, target] : root_targets) external.erase(target);
    std::vector<std::string> names;
    for (const auto& [name, target] : all) {
      names.push_back(name);
      root.children.push_back(target);
    }
    root.payload = encode_name_list(names);
  }

  if (!root_targets.empty()) {
    const ObjectFeatures rf = features_of(root);
    PodBuild rb;
    rb.stats = {static_cast<double>(rf.size), optimizer.volatility(rf), 0};
    rb.members.push_back(std::move(root));
    builds.push_back(std::move(rb));
    placed.emplace(root_id, Placement{0, 0});

    struct Frame {
      std::uint32_t pod;
      std::uint32_t member;
      std::size_t next = 0;
    };
    std::vector<Frame> stack{{0, 0}};

    while (!stack.empty()) {
      Frame& f = stack.back();
      const ObjectNode& node = builds[f.pod].members[f.member];
      if (f.next == node.children.size()) {
        stack.pop_back();
        continue;
      }
      const ObjectId child = node.children[f.next++];
      if (placed.contains(child)) continue;
      if (f.pod == 0 && f.member == 0 && external.contains(child)) continue;

      const std::uint32_t cur = f.pod;
      const bool from_root = f.pod == 0 && f.member == 0;
      ObjectNode cn = source(child);
      const ObjectFeatures feats = features_of(cn);

      PoddingAction action = PoddingAction::kBundle;
      double lambda = 0.0;
      if (!builds[cur].final) {
        lambda = optimizer.volatility(feats);
        if (from_root && options.split_variable_roots) {
          action = PoddingAction::kSplitContinue;
        } else {
          action = optimizer.decide(feats, lambda, builds[cur].stats);
          result.actions[child] = action;
        }
      }

      std::uint32_t target = cur;
      if (action == PoddingAction::kBundle) {
        builds[cur].stats.size += static_cast<double>(feats.size);
        builds[cur].stats.volatility += lambda;
      } else {
        PodBuild nb;
        nb.stats = {static_cast<double>(feats.size), lambda, builds[cur].stats.depth + 1};
        nb.final = action == PoddingAction::kSplitFinal;
        target = static_cast<std::uint32_t>(builds.size());
        builds.push_back(std::move(nb));
      }
      auto local = static_cast<std::uint32_t>(builds[target].members.size());
      builds[target].members.push_back(std::move(cn));
      placed.emplace(child, Placement{target, local});
      stack.push_back({target, local});
    }
  }

  // Pages are allocated only for members referenced from another pod.
  const std::uint32_t B = pages.page_size();
  std::vector<std::set<std::uint32_t>> needed(builds.size());
  for (std::uint32_t p = 0; p < builds.size(); ++p) {
    for (const ObjectNode& m : builds[p].members) {
      for (ObjectId c : m.children) {
        if (!placed.contains(c)) continue;  // carried root
        const Placement& q = placed.at(c);
        if (q.pod != p) {
          needed[q.pod].insert(q.local / B);
          result.graph.edges.insert({PodId{options.time_id, p}, PodId{options.time_id, q.pod}});
        }
      }
    }
  }

  result.memo_table.page_size = B;
  std::vector<std::map<std::uint32_t, std::uint64_t>> deltas(builds.size());
  for (std::uint32_t p = 0; p < builds.size(); ++p) {
    const ObjectId head = builds[p].members.front().id;
    for (std::uint32_t page : needed[p]) {
      const std::uint64_t delta = pages.page(head, page);
      if (delta + B > kCrossPodBase) {
        throw Error(ErrorCode::kTooLarge, "global memo id space exhausted");
      }
      deltas[p].emplace(page, delta);
      const std::uint32_t begin = page * B;
      const auto end = std::min<std::size_t>(builds[p].members.size(), std::size_t{begin} + B);
      for (std::uint32_t k = begin; k < end; ++k) {
        result.memo_table.assignments.emplace(delta + (k - begin), builds[p].members[k].id);
      }
    }
  }

  auto global_of = [&](const Placement& q) {
    return deltas[q.pod].at(q.local / B) + q.local % B;
  };

  result.pods.reserve(builds.size());
  for (std::uint32_t p = 0; p < builds.size(); ++p) {
    Pod pod;
    pod.id = PodId{options.time_id, p};
    pod.depth = builds[p].stats.depth;
    for (const auto& [page, delta] : deltas[p]) pod.page_offsets.push_back({page, delta});
    pod.bytes = encode_pod(
        builds[p].members,
        [&](ObjectId c) -> std::uint32_t {
          auto it = placed.find(c);
          if (it == placed.end()) return static_cast<std::uint32_t>(kCrossPodBase + external.at(c));
          const Placement& q = it->second;
          if (q.pod == p) return q.local;
          return static_cast<std::uint32_t>(kCrossPodBase + global_of(q));
        },
        pod.page_offsets);
    pod.members.reserve(builds[p].members.size());
    for (const ObjectNode& m : builds[p].members) pod.members.push_back(m.id);
    result.object_count += pod.members.size();
    result.graph.pods.insert(pod.id);
    result.pods.push_back(std::move(pod));
    builds[p].members.clear();
    builds[p].members.shrink_to_fit();
  }

  for (const auto& [name, target] : root_targets) {
    const Placement& q = placed.at(target);
    result.roots.emplace(name, MemberRef{PodId{options.time_id, q.pod}, q.local});
  }
  return result;
}

PodSaveResult pod_save(const ObjectGraph& graph, const NameSet& roots,
                       PoddingOptimizer& optimizer, GlobalPageAllocator& pages,
                       const PodSaveOptions& options) {
  std::map<std::string, ObjectId> targets;
  for (const auto& name : roots) targets.emplace(name, graph.lookup(name));
  return pod_save([&](ObjectId id) { return graph.node(id); }, graph.root(), targets, optimizer,
                  pages, options);
}

// --- unpodding -------------------------------------------------------------

void GlobalIndex::add(PodId pod, const PageOffset& page) {
  pages_[page.delta] = {pod, page.page_index};
}

MemberRef GlobalIndex::resolve(std::uint64_t global_id) const {
  auto it = pages_.upper_bound(global_id);
  if (it == pages_.begin()) {
    throw Error(ErrorCode::kUnresolvedGlobalId,
                "global memo id " + std::to_string(global_id) + " is not allocated");
  }
  --it;
  const std::uint64_t offset = global_id - it->first;
  if (offset >= page_size_) {
    throw Error(ErrorCode::kUnresolvedGlobalId,
                "global memo id " + std::to_string(global_id) + " is not allocated");
  }
  const auto& [pod, page_index] = it->second;
  return MemberRef{pod, static_cast<std::uint32_t>(std::uint64_t{page_index} * page_size_ + offset)};
}

void unpod_into(ObjectGraph& out, const std::map<std::string, MemberRef>& roots,
                const PodFetcher& fetch, const GlobalIndex& index,
                const std::map<PodId, std::vector<PageOffset>>* expected_pages) {
  std::map<PodId, DecodedPod> decoded;
  std::map<MemberRef, ObjectId> made;
  std::vector<std::pair<MemberRef, ObjectId>> work;

  auto pod_of = [&](PodId id) -> DecodedPod& {
    auto it = decoded.find(id);
    if (it != decoded.end()) return it->second;
    DecodedPod pod = decode_pod(fetch(id));
    if (expected_pages != nullptr) {
      auto exp = expected_pages->find(id);
      const std::vector<PageOffset> none;
      const auto& want = exp == expected_pages->end() ? none : exp->second;
      if (pod.pages != want) {
        throw Error(ErrorCode::kMalformedBytes,
                    "page trailer of pod " + to_string(id) + " disagrees with the manifest");
      }
    }
    return decoded.emplace(id, std::move(pod)).first->second;
  };

  auto materialize = [&](const MemberRef& ref) -> ObjectId {
    if (auto it = made.find(ref); it != made.end()) return it->second;
    DecodedPod& pod = pod_of(ref.pod);
    if (ref.member >= pod.members.size()) {
      throw Error(ErrorCode::kUnresolvedGlobalId, "pod " + to_string(ref.pod) + " has no member " +
                                                      std::to_string(ref.member));
    }
    DecodedMember& m = pod.members[ref.member];
    ObjectId id = out.create(m.kind, std::move(m.payload));
    made.emplace(ref, id);
    work.emplace_back(ref, id);
    return id;
  };

  std::map<std::string, ObjectId> bound;
  for (const auto& [name, ref] : roots) bound.emplace(name, materialize(ref));

  while (!work.empty()) {
    auto [ref, id] = work.back();
    work.pop_back();
    // Copy: materialize() may decode more pods and rehash nothing here, but the
    // member's child list must survive recursive lookups into the same pod.
    const std::vector<std::uint32_t> vids = decoded.at(ref.pod).members[ref.member].children;
    const std::size_t local_count = decoded.at(ref.pod).members.size();
    std::vector<ObjectId> children;
    children.reserve(vids.size());
    for (std::uint32_t v : vids) {
      if (v < kCrossPodBase) {
        if (v >= local_count) {
          throw Error(ErrorCode::kMalformedBytes,
                      "local reference " + std::to_string(v) + " out of range in pod " +
                          to_string(ref.pod));
        }
        children.push_back(materialize(MemberRef{ref.pod, v}));
      } else {
        children.push_back(materialize(index.resolve(v - kCrossPodBase)));
      }
    }
    out.set_children(id, std::move(children));
  }

  for (const auto& [name, id] : bound) out.bind(name, id);
}

ObjectGraph unpod(const std::map<std::string, MemberRef>& roots, const PodFetcher& fetch,
                  const GlobalIndex& index) {
  ObjectGraph out;
  unpod_into(out, roots, fetch, index);
  return out;
}

}  // namespace podstore
