#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace podstore {

using Bytes = std::vector<std::uint8_t>;
using NameSet = std::set<std::string>;

struct ObjectId {
  std::uint64_t value = 0;

  friend auto operator<=>(const ObjectId&, const ObjectId&) = default;
};

struct ObjectIdHash {
  std::size_t operator()(ObjectId id) const noexcept {
    return std::hash<std::uint64_t>{}(id.value);
  }
};

using ObjectIdSet = std::set<ObjectId>;

enum class ObjectKind : std::uint8_t { kLeaf = 0, kContainer = 1 };

struct ObjectNode {
  ObjectId id;
  ObjectKind kind = ObjectKind::kLeaf;
  Bytes payload;
  std::vector<ObjectId> children;
};

// Size proxy s(u): payload + 8 bytes per child reference + 16 byte header.
std::uint64_t object_size(const ObjectNode& node);

// The namespace: a rooted object graph plus a name -> object map. The root is
// a Container whose payload lists the variable names (sorted) and whose
// children are the variable targets in the same order.
//
// Not internally synchronized.
class ObjectGraph {
 public:
  ObjectGraph();

  ObjectId root() const { return root_; }
  const std::map<std::string, ObjectId>& variables() const { return variables_; }
  std::size_t node_count() const { return nodes_.size(); }

  bool contains(ObjectId id) const { return nodes_.contains(id); }
  const ObjectNode& node(ObjectId id) const;
  ObjectNode& mutable_node(ObjectId id);

  ObjectId add_leaf(Bytes payload);
  ObjectId add_container(Bytes header, std::vector<ObjectId> children);
  // Creates a node without children; used when rebuilding cyclic graphs.
  ObjectId create(ObjectKind kind, Bytes payload);
  void set_children(ObjectId id, std::vector<ObjectId> children);

  void bind(const std::string& name, ObjectId target);
  void unbind(const std::string& name);
  ObjectId lookup(const std::string& name) const;
  bool has_variable(const std::string& name) const {
    return variables_.contains(name);
  }

  // Drops nodes unreachable from the root. Returns the number removed.
  std::size_t collect_garbage();

  // Throws on dangling children, missing variable targets or a bad root.
  void validate() const;

  template <typename Fn>
  void for_each_node(Fn&& fn) const {
    for (const auto& [id, node] : nodes_) fn(node);
  }

 private:
  void refresh_root();

  ObjectId root_;
  std::unordered_map<ObjectId, ObjectNode, ObjectIdHash> nodes_;
  std::map<std::string, ObjectId> variables_;
  std::uint64_t next_id_ = 1;
};

// Encodes the sorted variable names as the root header payload.
Bytes encode_name_list(const std::vector<std::string>& names);

ObjectIdSet reachable_from(const ObjectGraph& graph, const NameSet& names);

// Variables sharing a weakly connected component (edges undirected, the root
// excluded) with any accessed variable.
NameSet connected_variables(const ObjectGraph& graph, const NameSet& accessed);

// Deterministic depth-first encoding of everything reachable from `names`.
// Two namespaces are equal iff these bytes are equal.
Bytes canonical_serialize(const ObjectGraph& graph, const NameSet& names);

// Convenience: all variables of the graph.
Bytes canonical_serialize(const ObjectGraph& graph);

}  // namespace podstore
