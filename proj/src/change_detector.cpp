#include "podstore/change_detector.hpp"

#define XXH_INLINE_ALL
#include "xxhash.h"

#include "podstore/error.hpp"

namespace podstore {

Digest128 xxh3_digest(std::span<const std::uint8_t> bytes) {
  XXH128_hash_t h = XXH3_128bits(bytes.data(), bytes.size());
  return {h.high64, h.low64};
}

Digest128 truncated8_digest(std::span<const std::uint8_t> bytes) {
  return {0, xxh3_digest(bytes).lo & 0xFF};
}

DigestFn digest_function(DigestMode mode) {
  switch (mode) {
    case DigestMode::kXxh3:
      return xxh3_digest;
    case DigestMode::kTruncated8:
      return truncated8_digest;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown digest mode");
}

PodThesaurus::PodThesaurus(std::uint64_t capacity_bytes) : capacity_(capacity_bytes) {
  if (capacity_ < kEntryBytes) {
    throw Error(ErrorCode::kCapacityTooSmall,
                "thesaurus capacity " + std::to_string(capacity_) + " B holds no entry (" +
                    std::to_string(kEntryBytes) + " B each)");
  }
}

std::optional<PodId> PodThesaurus::find(const Digest128& d) const {
  auto it = entries_.find(d);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void PodThesaurus::insert(const Digest128& d, PodId id) {
  if (entries_.contains(d)) return;
  // Make room first: the newest resident entries go, the incoming one stays.
  while (!order_.empty() && (entries_.size() + 1) * kEntryBytes > capacity_) {
    entries_.erase(order_.back());
    order_.pop_back();
    ++evictions_;
  }
  entries_.emplace(d, id);
  order_.push_back(d);
}

void SynonymTable::link(PodId synonym, PodId canonical) {
  links_[synonym] = resolve(canonical);
}

PodId SynonymTable::resolve(PodId id) const {
  if (written_.contains(id)) return id;
  auto it = links_.find(id);
  if (it == links_.end()) {
    throw Error(ErrorCode::kUnknownPodId, "pod " + to_string(id) + " is neither written nor a synonym");
  }
  return it->second;
}

ChangeDetector::ChangeDetector(std::uint64_t capacity_bytes, DigestFn digest)
    : thesaurus_(capacity_bytes), digest_(std::move(digest)) {}

CheckResult ChangeDetector::check_and_register(const Pod& pod) {
  CheckResult r;
  r.digest = digest_(pod.bytes);
  if (auto hit = thesaurus_.find(r.digest)) {
    r.canonical = synonyms_.resolve(*hit);
    synonyms_.link(pod.id, r.canonical);
    return r;
  }
  r.must_write = true;
  r.canonical = pod.id;
  thesaurus_.insert(r.digest, pod.id);
  return r;
}

}  // namespace podstore
