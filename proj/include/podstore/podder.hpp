#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "podstore/object_graph.hpp"
#include "podstore/optimizer.hpp"

namespace podstore {

struct PodId {
  std::uint64_t time_id = 0;
  std::uint64_t serial = 0;

  friend auto operator<=>(const PodId&, const PodId&) = default;
};

std::string to_string(PodId id);

struct PodIdHash {
  std::size_t operator()(PodId id) const noexcept {
    return std::hash<std::uint64_t>{}(id.time_id * 0x9E3779B97F4A7C15ULL ^ id.serial);
  }
};

// Local virtual ids below this bound address pod members; at or above it the
// id is a global memo id offset by the bound.
inline constexpr std::uint64_t kCrossPodBase = std::uint64_t{1} << 31;
inline constexpr std::uint32_t kDefaultPageSize = 1024;

struct PageOffset {
  std::uint32_t page_index = 0;
  std::uint64_t delta = 0;

  friend bool operator==(const PageOffset&, const PageOffset&) = default;
};

struct Pod {
  PodId id;
  std::vector<ObjectId> members;
  Bytes bytes;
  std::vector<PageOffset> page_offsets;
  int depth = 0;
};

struct PodGraph {
  std::set<PodId> pods;
  std::set<std::pair<PodId, PodId>> edges;
};

// Page table of one pod (or of a whole save when merged): page index -> delta,
// plus the objects that own allocated global ids.
struct VirtualMemoTable {
  std::uint32_t page_size = kDefaultPageSize;
  std::map<std::uint32_t, std::uint64_t> pages;
  std::map<std::uint64_t, ObjectId> assignments;

  static VirtualMemoTable from_deltas(std::uint32_t page_size,
                                      const std::vector<std::uint64_t>& deltas);
};

// delta_i + r for m < 2^31 (i = m / B, r = m mod B), m - 2^31 otherwise.
// Throws PageNotAllocated when page i has no delta.
std::uint64_t map_virtual_to_global(std::uint64_t m_virtual, const VirtualMemoTable& table);

// Hands out pages of B global memo ids. Pages are keyed by the pod's head
// object and page index, so an unchanged pod reuses its offsets across saves
// and encodes to identical bytes.
class GlobalPageAllocator {
 public:
  explicit GlobalPageAllocator(std::uint32_t page_size = kDefaultPageSize);

  std::uint64_t page(ObjectId head, std::uint32_t page_index);
  std::uint32_t page_size() const { return page_size_; }
  std::uint64_t allocated_pages() const { return next_ / page_size_; }
  // Ensures future pages start at or above `floor` (used when reopening a store).
  void reserve(std::uint64_t floor) {
    std::uint64_t aligned = (floor + page_size_ - 1) / page_size_ * page_size_;
    if (aligned > next_) next_ = aligned;
  }

  template <typename Pred>
  void prune(Pred&& alive) {
    std::erase_if(pages_, [&](const auto& kv) { return !alive(kv.first.first); });
  }

 private:
  struct KeyHash {
    std::size_t operator()(const std::pair<ObjectId, std::uint32_t>& k) const noexcept {
      return ObjectIdHash{}(k.first) * 31 + k.second;
    }
  };

  std::uint32_t page_size_;
  std::uint64_t next_ = 0;
  std::unordered_map<std::pair<ObjectId, std::uint32_t>, std::uint64_t, KeyHash> pages_;
};

// Pod byte format "POD1" (all integers little-endian):
//   magic "POD1" | u32 member count
//   per member: u8 kind | u32 payload length | payload | u32 child count |
//               u32 child virtual id * child count
//   u32 page count | (u32 page index, u64 delta) * page count
using ChildResolver = std::function<std::uint32_t(ObjectId)>;

Bytes encode_pod(std::span<const ObjectNode> members, const ChildResolver& resolve_child,
                 std::span<const PageOffset> pages);

struct DecodedMember {
  ObjectKind kind = ObjectKind::kLeaf;
  Bytes payload;
  std::vector<std::uint32_t> children;
};

struct DecodedPod {
  std::vector<DecodedMember> members;
  std::vector<PageOffset> pages;
};

DecodedPod decode_pod(std::span<const std::uint8_t> bytes);

// Where a loaded name points: a member slot of a pod.
struct MemberRef {
  PodId pod;
  std::uint32_t member = 0;

  friend auto operator<=>(const MemberRef&, const MemberRef&) = default;
};

struct PodSaveOptions {
  std::uint64_t time_id = 1;
  // Forces every variable target into its own pod (the store relies on this
  // to keep variables separable).
  bool split_variable_roots = false;
  // Variables saved earlier and not podded now: listed in the root object and
  // referenced by the global memo id they already have.
  std::map<std::string, std::pair<ObjectId, std::uint64_t>> carried_roots;
};

struct PodSaveResult {
  std::vector<Pod> pods;  // pods[0] holds the namespace root
  PodGraph graph;
  VirtualMemoTable memo_table;  // merged over all pods of the save
  std::map<std::string, MemberRef> roots;
  // Action applied to every object the optimizer was consulted on.
  std::unordered_map<ObjectId, PoddingAction, ObjectIdHash> actions;
  std::size_t object_count = 0;
};

// Copies an object out of the namespace; lets the async path take the
// namespace lock per read.
using NodeSource = std::function<ObjectNode(ObjectId)>;

PodSaveResult pod_save(const NodeSource& source, ObjectId root_id,
                       const std::map<std::string, ObjectId>& root_targets,
                       PoddingOptimizer& optimizer, GlobalPageAllocator& pages,
                       const PodSaveOptions& options = {});

PodSaveResult pod_save(const ObjectGraph& graph, const NameSet& roots,
                       PoddingOptimizer& optimizer, GlobalPageAllocator& pages,
                       const PodSaveOptions& options = {});

// Maps global memo ids back to pod members: delta -> (pod, page index).
class GlobalIndex {
 public:
  explicit GlobalIndex(std::uint32_t page_size = kDefaultPageSize) : page_size_(page_size) {}

  void add(PodId pod, const PageOffset& page);
  MemberRef resolve(std::uint64_t global_id) const;
  std::uint32_t page_size() const { return page_size_; }
  const std::map<std::uint64_t, std::pair<PodId, std::uint32_t>>& pages() const {
    return pages_;
  }

 private:
  std::uint32_t page_size_;
  std::map<std::uint64_t, std::pair<PodId, std::uint32_t>> pages_;
};

// Returns the bytes of a pod; the caller resolves synonyms.
using PodFetcher = std::function<Bytes(PodId)>;

// Rebuilds the objects reachable from `roots` into `out` and binds the names.
// Each pod is fetched and decoded at most once per call. When
// `expected_pages` is given, every fetched pod's page trailer must match it.
void unpod_into(ObjectGraph& out, const std::map<std::string, MemberRef>& roots,
                const PodFetcher& fetch, const GlobalIndex& index,
                const std::map<PodId, std::vector<PageOffset>>* expected_pages = nullptr);

ObjectGraph unpod(const std::map<std::string, MemberRef>& roots, const PodFetcher& fetch,
                  const GlobalIndex& index);

}  // namespace podstore
