#include "podstore/workload.hpp"

#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "podstore/error.hpp"

namespace podstore {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

const Bytes kListHeader = {'l', 'i', 's', 't'};

std::vector<std::string_view> split_words(std::string_view line) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) words.push_back(line.substr(i, j - i));
    i = j;
  }
  return words;
}

[[noreturn]] void bad(const std::string& reason) { throw Error(ErrorCode::kParseError, reason); }

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  auto head = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  if (!head(s[0])) return false;
  for (char c : s) {
    if (!head(c) && !(c >= '0' && c <= '9')) return false;
  }
  return true;
}

std::string name_arg(std::string_view s) {
  if (!valid_name(s)) bad("invalid variable name '" + std::string(s) + "'");
  return std::string(s);
}

template <typename T>
T uint_arg(std::string_view s, const char* what) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    bad(std::string("invalid ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

double fraction_arg(std::string_view s) {
  double v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) bad("invalid fraction '" + std::string(s) + "'");
  if (!(v >= 0.0 && v <= 1.0)) bad("fraction " + std::string(s) + " outside [0, 1]");
  return v;
}

void arity(const std::vector<std::string_view>& w, std::size_t n) {
  if (w.size() != n) {
    bad(std::string(w[0]) + " takes " + std::to_string(n - 1) + " argument(s), got " +
        std::to_string(w.size() - 1));
  }
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
  Bytes out(n);
  std::size_t i = 0;
  while (i < n) {
    std::uint64_t word = rng();
    for (int b = 0; b < 8 && i < n; ++b, ++i) out[i] = static_cast<std::uint8_t>(word >> (8 * b));
  }
  return out;
}

ObjectId need_var(const ObjectGraph& ns, const std::string& name) {
  if (!ns.has_variable(name)) throw Error(ErrorCode::kUnknownVariable, "unknown variable '" + name + "'");
  return ns.lookup(name);
}

const ObjectNode& need_container(const ObjectGraph& ns, const std::string& name) {
  const ObjectNode& n = ns.node(need_var(ns, name));
  if (n.kind != ObjectKind::kContainer) {
    throw Error(ErrorCode::kTypeMismatch, "variable '" + name + "' is not a list");
  }
  return n;
}

std::uint64_t payload_total(const ObjectGraph& ns, ObjectId start) {
  std::uint64_t total = 0;
  ObjectIdSet seen{start};
  std::vector<ObjectId> stack{start};
  while (!stack.empty()) {
    const ObjectNode& n = ns.node(stack.back());
    stack.pop_back();
    total += n.payload.size();
    for (ObjectId c : n.children) {
      if (seen.insert(c).second) stack.push_back(c);
    }
  }
  return total;
}

}  // namespace

std::string_view statement_kind(const Statement& stmt) {
  static constexpr std::string_view kinds[] = {"make_lists", "mutate_fraction", "append_leaf",
                                               "assign",     "read",            "sum",
                                               "head",       "checkpoint",      "load"};
  return kinds[stmt.index()];
}

const std::vector<std::string>& statement_kinds() {
  static const std::vector<std::string> kinds = {"make_lists", "mutate_fraction", "append_leaf",
                                                 "assign",     "read",            "sum",
                                                 "head",       "checkpoint",      "load"};
  return kinds;
}

Statement parse_statement(std::string_view line) {
  auto w = split_words(line);
  if (w.empty()) bad("empty statement");
  const std::string_view op = w[0];
  if (op == "make_lists") {
    arity(w, 5);
    return MakeLists{name_arg(w[1]), uint_arg<std::uint32_t>(w[2], "list count"),
                     uint_arg<std::uint32_t>(w[3], "strings per list"),
                     uint_arg<std::uint32_t>(w[4], "string size")};
  }
  if (op == "mutate_fraction") {
    arity(w, 4);
    return MutateFraction{name_arg(w[1]), fraction_arg(w[2]), uint_arg<std::uint64_t>(w[3], "seed")};
  }
  if (op == "append_leaf") {
    arity(w, 3);
    return AppendLeaf{name_arg(w[1]), uint_arg<std::uint32_t>(w[2], "byte count")};
  }
  if (op == "assign") {
    arity(w, 3);
    return Assign{name_arg(w[1]), name_arg(w[2])};
  }
  if (op == "read") {
    arity(w, 2);
    return Read{name_arg(w[1])};
  }
  if (op == "sum") {
    arity(w, 2);
    return Sum{name_arg(w[1])};
  }
  if (op == "head") {
    arity(w, 3);
    return Head{name_arg(w[1]), uint_arg<std::uint32_t>(w[2], "k")};
  }
  if (op == "checkpoint") {
    arity(w, 1);
    return Checkpoint{};
  }
  if (op == "load") {
    if (w.size() < 2) bad("load needs a time id");
    Load l{uint_arg<std::uint64_t>(w[1], "time id"), {}};
    for (std::size_t i = 2; i < w.size(); ++i) l.names.push_back(name_arg(w[i]));
    return l;
  }
  bad("unknown statement '" + std::string(op) + "'");
}

Script parse_script(std::string_view text) {
  Script script;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (split_words(line).empty()) continue;
    try {
      script.statements.push_back(parse_statement(line));
    } catch (const Error& e) {
      throw Error(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return script;
}

std::string render(const Statement& stmt) {
  std::ostringstream out;
  std::visit(Overloaded{
                 [&](const MakeLists& s) {
                   out << "make_lists " << s.var << ' ' << s.n_lists << ' ' << s.strings_per_list
                       << ' ' << s.string_bytes;
                 },
                 [&](const MutateFraction& s) {
                   out << "mutate_fraction " << s.var << ' ' << format_double(s.fraction) << ' '
                       << s.seed;
                 },
                 [&](const AppendLeaf& s) { out << "append_leaf " << s.var << ' ' << s.bytes; },
                 [&](const Assign& s) { out << "assign " << s.dst << ' ' << s.src; },
                 [&](const Read& s) { out << "read " << s.var; },
                 [&](const Sum& s) { out << "sum " << s.var; },
                 [&](const Head& s) { out << "head " << s.var << ' ' << s.k; },
                 [&](const Checkpoint&) { out << "checkpoint"; },
                 [&](const Load& s) {
                   out << "load " << s.time_id;
                   for (const auto& n : s.names) out << ' ' << n;
                 },
             },
             stmt);
  return out.str();
}

std::string render(const Script& script) {
  std::string out;
  for (const auto& s : script.statements) {
    out += render(s);
    out += '\n';
  }
  return out;
}

NameSet accessed_variables(const Statement& stmt) {
  return std::visit(Overloaded{
                        [](const MakeLists& s) { return NameSet{s.var}; },
                        [](const MutateFraction& s) { return NameSet{s.var}; },
                        [](const AppendLeaf& s) { return NameSet{s.var}; },
                        [](const Assign& s) { return NameSet{s.dst, s.src}; },
                        [](const Read& s) { return NameSet{s.var}; },
                        [](const Sum& s) { return NameSet{s.var}; },
                        [](const Head& s) { return NameSet{s.var}; },
                        [](const Checkpoint&) { return NameSet{}; },
                        [](const Load&) { return NameSet{}; },
                    },
                    stmt);
}

std::vector<std::uint32_t> select_lists(std::uint32_t n_lists, double fraction,
                                        std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "fraction outside [0, 1]");
  }
  // The epsilon keeps products like 0.1 * 30 from rounding up past an integer.
  auto k = static_cast<std::uint32_t>(std::ceil(fraction * n_lists - 1e-9));
  k = std::min(k, n_lists);
  std::vector<std::uint32_t> idx(n_lists);
  std::iota(idx.begin(), idx.end(), 0U);
  std::mt19937_64 rng(seed);
  for (std::uint32_t i = 0; i < k; ++i) {
    std::uint32_t j = i + static_cast<std::uint32_t>(rng() % (n_lists - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

EffectRecord execute_statement(ObjectGraph& ns, const Statement& stmt, std::uint64_t rng_seed,
                               const ExecuteOptions& options) {
  EffectRecord fx;
  fx.accessed = accessed_variables(stmt);

  std::visit(
      Overloaded{
          [&](const MakeLists& s) {
            std::mt19937_64 rng(rng_seed);
            std::vector<ObjectId> lists;
            lists.reserve(s.n_lists);
            for (std::uint32_t l = 0; l < s.n_lists; ++l) {
              std::vector<ObjectId> leaves;
              leaves.reserve(s.strings_per_list);
              for (std::uint32_t i = 0; i < s.strings_per_list; ++i) {
                ObjectId leaf = ns.add_leaf(random_bytes(rng, s.string_bytes));
                fx.mutated_objects.insert(leaf);
                leaves.push_back(leaf);
              }
              ObjectId list = ns.add_container(kListHeader, std::move(leaves));
              fx.mutated_objects.insert(list);
              lists.push_back(list);
            }
            ObjectId outer = ns.add_container(kListHeader, std::move(lists));
            fx.mutated_objects.insert(outer);
            ns.bind(s.var, outer);
          },
          [&](const MutateFraction& s) {
            const ObjectNode& outer = need_container(ns, s.var);
            const std::vector<ObjectId> lists = outer.children;
            std::mt19937_64 rng(s.seed);
            auto chosen = select_lists(static_cast<std::uint32_t>(lists.size()), s.fraction, s.seed);
            // Continue the stream past the selection draws for the payloads.
            rng.discard(chosen.size());
            for (std::uint32_t i : chosen) {
              const ObjectId list = lists[i];
              if (ns.node(list).kind != ObjectKind::kContainer) continue;
              std::vector<ObjectId> children = ns.node(list).children;
              bool changed = false;
              for (ObjectId& c : children) {
                const ObjectNode& leaf = ns.node(c);
                if (leaf.kind != ObjectKind::kLeaf) continue;
                c = ns.add_leaf(random_bytes(rng, leaf.payload.size()));
                fx.mutated_objects.insert(c);
                changed = true;
              }
              if (changed) {
                ns.set_children(list, std::move(children));
                fx.mutated_objects.insert(list);
              }
            }
          },
          [&](const AppendLeaf& s) {
            const ObjectNode& target = need_container(ns, s.var);
            std::vector<ObjectId> children = target.children;
            const ObjectId id = target.id;
            std::mt19937_64 rng(rng_seed);
            ObjectId leaf = ns.add_leaf(random_bytes(rng, s.bytes));
            children.push_back(leaf);
            ns.set_children(id, std::move(children));
            fx.mutated_objects.insert(leaf);
            fx.mutated_objects.insert(id);
          },
          [&](const Assign& s) { ns.bind(s.dst, need_var(ns, s.src)); },
          [&](const Read& s) { fx.value = object_size(ns.node(need_var(ns, s.var))); },
          [&](const Sum& s) { fx.value = payload_total(ns, need_var(ns, s.var)); },
          [&](const Head& s) {
            const ObjectNode& n = ns.node(need_var(ns, s.var));
            const std::size_t k = std::min<std::size_t>(s.k, n.children.size());
            for (std::size_t i = 0; i < k; ++i) fx.value += object_size(ns.node(n.children[i]));
          },
          [&](const Checkpoint&) {},
          [&](const Load&) {},
      },
      stmt);

  if (options.check_locality && !fx.mutated_objects.empty()) {
    const ObjectIdSet closure = reachable_from(ns, fx.accessed);
    for (ObjectId id : fx.mutated_objects) {
      if (!closure.contains(id)) {
        throw Error(ErrorCode::kLocalityViolation,
                    "object " + std::to_string(id.value) + " mutated outside the accessed closure");
      }
    }
  }
  return fx;
}

}  // namespace podstore
