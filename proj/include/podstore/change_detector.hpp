#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>
#include <vector>

#include "podstore/podder.hpp"

namespace podstore {

struct Digest128 {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  friend auto operator<=>(const Digest128&, const Digest128&) = default;
};

struct Digest128Hash {
  std::size_t operator()(const Digest128& d) const noexcept { return d.lo ^ (d.hi * 31); }
};

using DigestFn = std::function<Digest128(std::span<const std::uint8_t>)>;

// XXH3 128-bit.
Digest128 xxh3_digest(std::span<const std::uint8_t> bytes);
// XXH3 truncated to its low 8 bits; collides on purpose, for tests.
Digest128 truncated8_digest(std::span<const std::uint8_t> bytes);

enum class DigestMode { kXxh3, kTruncated8 };
DigestFn digest_function(DigestMode mode);

inline constexpr std::uint64_t kDefaultThesaurusBytes = std::uint64_t{64} << 20;

// Digest -> PodId cache bounded by bytes, evicting the most recent insert first.
class PodThesaurus {
 public:
  // 16-byte digest plus two u64 PodId fields.
  static constexpr std::uint64_t kEntryBytes = 16 + sizeof(PodId);

  explicit PodThesaurus(std::uint64_t capacity_bytes = kDefaultThesaurusBytes);

  std::optional<PodId> find(const Digest128& d) const;
  void insert(const Digest128& d, PodId id);

  std::uint64_t capacity_bytes() const { return capacity_; }
  std::uint64_t footprint_bytes() const { return entries_.size() * kEntryBytes; }
  std::size_t size() const { return entries_.size(); }
  std::uint64_t evictions() const { return evictions_; }

 private:
  std::uint64_t capacity_;
  std::unordered_map<Digest128, PodId, Digest128Hash> entries_;
  std::vector<Digest128> order_;
  std::uint64_t evictions_ = 0;
};

class SynonymTable {
 public:
  // `canonical` must be a written pod; chains are collapsed so every link is one hop.
  void link(PodId synonym, PodId canonical);
  void mark_written(PodId id) { written_.insert(id); }
  bool is_written(PodId id) const { return written_.contains(id); }
  bool knows(PodId id) const { return written_.contains(id) || links_.contains(id); }
  PodId resolve(PodId id) const;
  const std::map<PodId, PodId>& links() const { return links_; }

 private:
  std::map<PodId, PodId> links_;
  std::set<PodId> written_;
};

struct CheckResult {
  bool must_write = false;
  PodId canonical;  // set when must_write is false
  Digest128 digest;
};

class ChangeDetector {
 public:
  explicit ChangeDetector(std::uint64_t capacity_bytes = kDefaultThesaurusBytes,
                          DigestFn digest = xxh3_digest);

  // On a thesaurus miss the pod must be written and is registered. On a hit
  // the pod becomes a synonym of the stored (written) id.
  CheckResult check_and_register(const Pod& pod);
  // Called once the pod's bytes are durable.
  void mark_written(PodId id) { synonyms_.mark_written(id); }

  Digest128 digest(std::span<const std::uint8_t> bytes) const { return digest_(bytes); }
  PodId resolve(PodId id) const { return synonyms_.resolve(id); }

  const PodThesaurus& thesaurus() const { return thesaurus_; }
  SynonymTable& synonyms() { return synonyms_; }
  const SynonymTable& synonyms() const { return synonyms_; }

 private:
  PodThesaurus thesaurus_;
  SynonymTable synonyms_;
  DigestFn digest_;
};

}  // namespace podstore
