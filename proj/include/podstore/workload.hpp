#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "podstore/object_graph.hpp"

namespace podstore {

// Script grammar, one statement per line, '#' starts a comment:
//
//   make_lists <var> <n_lists> <strings_per_list> <string_bytes>
//   mutate_fraction <var> <fraction 0..1> <seed>
//   append_leaf <var> <bytes>
//   assign <dst> <src>
//   read <var>
//   sum <var>
//   head <var> <k>
//   checkpoint
//   load <time_id> [<var> ...]
//
// Variable names match [A-Za-z_][A-Za-z0-9_]*.

struct MakeLists {
  std::string var;
  std::uint32_t n_lists = 0;
  std::uint32_t strings_per_list = 0;
  std::uint32_t string_bytes = 0;
  friend bool operator==(const MakeLists&, const MakeLists&) = default;
};

struct MutateFraction {
  std::string var;
  double fraction = 0.0;
  std::uint64_t seed = 0;
  friend bool operator==(const MutateFraction&, const MutateFraction&) = default;
};

struct AppendLeaf {
  std::string var;
  std::uint32_t bytes = 0;
  friend bool operator==(const AppendLeaf&, const AppendLeaf&) = default;
};

struct Assign {
  std::string dst;
  std::string src;
  friend bool operator==(const Assign&, const Assign&) = default;
};

struct Read {
  std::string var;
  friend bool operator==(const Read&, const Read&) = default;
};

struct Sum {
  std::string var;
  friend bool operator==(const Sum&, const Sum&) = default;
};

struct Head {
  std::string var;
  std::uint32_t k = 0;
  friend bool operator==(const Head&, const Head&) = default;
};

struct Checkpoint {
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// Verifies load(names, time_id) against the state retained at that
// checkpoint; does not rebind anything in the live namespace.
struct Load {
  std::uint64_t time_id = 0;
  std::vector<std::string> names;
  friend bool operator==(const Load&, const Load&) = default;
};

using Statement =
    std::variant<MakeLists, MutateFraction, AppendLeaf, Assign, Read, Sum, Head, Checkpoint, Load>;

struct Script {
  std::vector<Statement> statements;
  friend bool operator==(const Script&, const Script&) = default;
};

// Grammar keyword of the statement's variant ("make_lists", "sum", ...).
std::string_view statement_kind(const Statement& stmt);
const std::vector<std::string>& statement_kinds();

Script parse_script(std::string_view text);
Statement parse_statement(std::string_view line);
std::string render(const Statement& stmt);
std::string render(const Script& script);

NameSet accessed_variables(const Statement& stmt);

struct EffectRecord {
  NameSet accessed;
  ObjectIdSet mutated_objects;
  // Result of read-only statements (byte total, element count).
  std::uint64_t value = 0;
};

struct ExecuteOptions {
  // Verify mutated_objects lies inside the accessed closure; throws
  // LocalityViolation otherwise.
  bool check_locality = true;
};

// Randomness: std::mt19937_64 outputs used raw. Fresh bytes come from
// consecutive outputs, little-endian. MakeLists and AppendLeaf draw from a
// generator seeded with `rng_seed`; MutateFraction seeds with its own seed,
// selects ceil(f * n_lists) lists by a partial Fisher-Yates shuffle
// (j = i + out % (n - i)) and gives each selected list fresh leaf objects
// with fresh bytes of the same lengths.
EffectRecord execute_statement(ObjectGraph& ns, const Statement& stmt, std::uint64_t rng_seed,
                               const ExecuteOptions& options = {});

// Lists selected by MutateFraction (indices into the variable's children).
std::vector<std::uint32_t> select_lists(std::uint32_t n_lists, double fraction,
                                        std::uint64_t seed);

}  // namespace podstore
