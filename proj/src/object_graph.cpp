#include "podstore/object_graph.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "podstore/error.hpp"
#include "wire.hpp"

namespace podstore {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kUnknownVariable: return "UnknownVariable";
    case ErrorCode::kUnknownTimeId: return "UnknownTimeId";
    case ErrorCode::kUnknownPodId: return "UnknownPodId";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kPageNotAllocated: return "PageNotAllocated";
    case ErrorCode::kTooManyLocalMembers: return "TooManyLocalMembers";
    case ErrorCode::kMissingPod: return "MissingPod";
    case ErrorCode::kMalformedBytes: return "MalformedBytes";
    case ErrorCode::kUnresolvedGlobalId: return "UnresolvedGlobalId";
    case ErrorCode::kOverlappingPods: return "OverlappingPods";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kCapacityTooSmall: return "CapacityTooSmall";
    case ErrorCode::kDuplicatePodId: return "DuplicatePodId";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kMalformedManifest: return "MalformedManifest";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kTypeMismatch: return "TypeMismatch";
    case ErrorCode::kLocalityViolation: return "LocalityViolation";
  }
  return "Unknown";
}

std::uint64_t object_size(const ObjectNode& node) {
  return node.payload.size() + 8 * node.children.size() + 16;
}

Bytes encode_name_list(const std::vector<std::string>& names) {
  wire::Writer w;
  w.u32(static_cast<std::uint32_t>(names.size()));
  for (const auto& name : names) w.str(name);
  return w.take();
}

ObjectGraph::ObjectGraph() {
  root_ = create(ObjectKind::kContainer, {});
  refresh_root();
}

const ObjectNode& ObjectGraph::node(ObjectId id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) {
    throw Error(ErrorCode::kInvalidArgument,
                "no object with id " + std::to_string(id.value));
  }
  return it->second;
}

ObjectNode& ObjectGraph::mutable_node(ObjectId id) {
  return const_cast<ObjectNode&>(std::as_const(*this).node(id));
}

ObjectId ObjectGraph::create(ObjectKind kind, Bytes payload) {
  ObjectId id{next_id_++};
  nodes_.emplace(id, ObjectNode{id, kind, std::move(payload), {}});
  return id;
}

ObjectId ObjectGraph::add_leaf(Bytes payload) {
  return create(ObjectKind::kLeaf, std::move(payload));
}

ObjectId ObjectGraph::add_container(Bytes header, std::vector<ObjectId> children) {
  ObjectId id = create(ObjectKind::kContainer, std::move(header));
  set_children(id, std::move(children));
  return id;
}

void ObjectGraph::set_children(ObjectId id, std::vector<ObjectId> children) {
  ObjectNode& n = mutable_node(id);
  if (n.kind == ObjectKind::kLeaf && !children.empty()) {
    throw Error(ErrorCode::kTypeMismatch, "leaf objects cannot have children");
  }
  for (ObjectId child : children) {
    if (!nodes_.contains(child)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "child " + std::to_string(child.value) + " does not exist");
    }
  }
  n.children = std::move(children);
}

void ObjectGraph::bind(const std::string& name, ObjectId target) {
  if (!nodes_.contains(target)) {
    throw Error(ErrorCode::kInvalidArgument, "binding '" + name + "' to a missing object");
  }
  variables_[name] = target;
  refresh_root();
}

void ObjectGraph::unbind(const std::string& name) {
  if (variables_.erase(name) == 0) {
    throw Error(ErrorCode::kUnknownVariable, "unknown variable '" + name + "'");
  }
  refresh_root();
}

ObjectId ObjectGraph::lookup(const std::string& name) const {
  auto it = variables_.find(name);
  if (it == variables_.end()) {
    throw Error(ErrorCode::kUnknownVariable, "unknown variable '" + name + "'");
  }
  return it->second;
}

void ObjectGraph::refresh_root() {
  std::vector<std::string> names;
  std::vector<ObjectId> targets;
  names.reserve(variables_.size());
  for (const auto& [name, target] : variables_) {
    names.push_back(name);
    targets.push_back(target);
  }
  ObjectNode& r = nodes_.at(root_);
  r.payload = encode_name_list(names);
  r.children = std::move(targets);
}

std::size_t ObjectGraph::collect_garbage() {
  std::unordered_set<ObjectId, ObjectIdHash> live;
  std::vector<ObjectId> stack{root_};
  live.insert(root_);
  while (!stack.empty()) {
    ObjectId cur = stack.back();
    stack.pop_back();
    for (ObjectId child : nodes_.at(cur).children) {
      if (live.insert(child).second) stack.push_back(child);
    }
  }
  return std::erase_if(nodes_, [&](const auto& kv) { return !live.contains(kv.first); });
}

void ObjectGraph::validate() const {
  if (!nodes_.contains(root_)) {
    throw Error(ErrorCode::kInvalidArgument, "root object missing");
  }
  for (const auto& [name, target] : variables_) {
    if (!nodes_.contains(target)) {
      throw Error(ErrorCode::kInvalidArgument, "variable '" + name + "' dangles");
    }
  }
  for (const auto& [id, n] : nodes_) {
    if (n.kind == ObjectKind::kLeaf && !n.children.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "leaf with children");
    }
    for (ObjectId child : n.children) {
      if (!nodes_.contains(child)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "object " + std::to_string(id.value) + " has a dangling child");
      }
    }
  }
}

namespace {

std::vector<ObjectId> targets_of(const ObjectGraph& graph, const NameSet& names) {
  std::vector<ObjectId> out;
  out.reserve(names.size());
  for (const auto& name : names) out.push_back(graph.lookup(name));
  return out;
}

}  // namespace

ObjectIdSet reachable_from(const ObjectGraph& graph, const NameSet& names) {
  ObjectIdSet seen;
  std::vector<ObjectId> stack = targets_of(graph, names);
  for (ObjectId id : stack) seen.insert(id);
  while (!stack.empty()) {
    ObjectId cur = stack.back();
    stack.pop_back();
    for (ObjectId child : graph.node(cur).children) {
      if (seen.insert(child).second) stack.push_back(child);
    }
  }
  return seen;
}

NameSet connected_variables(const ObjectGraph& graph, const NameSet& accessed) {
  // Union-find over non-root objects.
  std::unordered_map<ObjectId, ObjectId, ObjectIdHash> parent;
  auto find = [&](ObjectId x) {
    ObjectId r = x;
    while (true) {
      auto it = parent.find(r);
      if (it == parent.end() || it->second == r) break;
      r = it->second;
    }
    while (x != r) {
      ObjectId next = parent[x];
      parent[x] = r;
      x = next;
    }
    return r;
  };
  auto unite = [&](ObjectId a, ObjectId b) {
    ObjectId ra = find(a), rb = find(b);
    if (ra != rb) parent[ra] = rb;
  };

  for (const auto& name : accessed) graph.lookup(name);

  graph.for_each_node([&](const ObjectNode& n) {
    if (n.id == graph.root()) return;
    for (ObjectId child : n.children) {
      if (child != graph.root()) unite(n.id, child);
    }
  });

  std::set<ObjectId> accessed_roots;
  for (const auto& name : accessed) accessed_roots.insert(find(graph.lookup(name)));

  NameSet out;
  for (const auto& [name, target] : graph.variables()) {
    if (accessed_roots.contains(find(target))) out.insert(name);
  }
  return out;
}

Bytes canonical_serialize(const ObjectGraph& graph, const NameSet& names) {
  constexpr std::uint8_t kNew = 0;
  constexpr std::uint8_t kBackRef = 1;

  wire::Writer w;
  w.u32(static_cast<std::uint32_t>(names.size()));
  std::unordered_map<ObjectId, std::uint64_t, ObjectIdHash> visit_index;
  std::vector<ObjectId> stack;

  for (const auto& name : names) {
    w.str(name);
    stack.push_back(graph.lookup(name));
    while (!stack.empty()) {
      ObjectId cur = stack.back();
      stack.pop_back();
      auto [it, inserted] = visit_index.try_emplace(cur, visit_index.size());
      if (!inserted) {
        w.u8(kBackRef);
        w.u64(it->second);
        continue;
      }
      const ObjectNode& n = graph.node(cur);
      w.u8(kNew);
      w.u8(static_cast<std::uint8_t>(n.kind));
      w.blob(n.payload);
      w.u32(static_cast<std::uint32_t>(n.children.size()));
      for (auto c = n.children.rbegin(); c != n.children.rend(); ++c) stack.push_back(*c);
    }
  }
  return w.take();
}

Bytes canonical_serialize(const ObjectGraph& graph) {
  NameSet all;
  for (const auto& [name, target] : graph.variables()) all.insert(name);
  return canonical_serialize(graph, all);
}

}  // namespace podstore
