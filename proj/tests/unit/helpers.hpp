#pragma once

#include <deque>
#include <map>
#include <random>
#include <string>

#include "podstore/object_graph.hpp"

namespace podstore::testing {

inline Bytes bytes_of(const std::string& s) { return Bytes(s.begin(), s.end()); }

// The notebook namespace of the running example:
//   fig -> u1, ax -> u3, dataset -> u7, trainer -> u6, model -> u8
//   u1 -> u2, u3;  u3 -> u4, u5;  u6 -> u7, u8;  u7 -> u9;  u8 -> u9, u8
struct Fig4 {
  ObjectGraph g;
  std::map<int, ObjectId> u;

  Fig4() {
    for (int i = 1; i <= 9; ++i) {
      const bool container = i == 1 || i == 3 || i == 6 || i == 7 || i == 8;
      u[i] = g.create(container ? ObjectKind::kContainer : ObjectKind::kLeaf,
                      bytes_of("u" + std::to_string(i)));
    }
    g.set_children(u[1], {u[2], u[3]});
    g.set_children(u[3], {u[4], u[5]});
    g.set_children(u[6], {u[7], u[8]});
    g.set_children(u[7], {u[9]});
    g.set_children(u[8], {u[9], u[8]});
    g.bind("fig", u[1]);
    g.bind("ax", u[3]);
    g.bind("dataset", u[7]);
    g.bind("trainer", u[6]);
    g.bind("model", u[8]);
  }
};

// Plain BFS over children from the named targets.
inline ObjectIdSet bfs_oracle(const ObjectGraph& g, const NameSet& names) {
  ObjectIdSet seen;
  std::deque<ObjectId> q;
  for (const auto& n : names) q.push_back(g.lookup(n));
  while (!q.empty()) {
    ObjectId id = q.front();
    q.pop_front();
    if (!seen.insert(id).second) continue;
    for (ObjectId c : g.node(id).children) q.push_back(c);
  }
  return seen;
}

inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace podstore::testing
