#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "podstore/change_detector.hpp"
#include "podstore/podder.hpp"

namespace podstore {

using TimeId = std::uint64_t;

struct CarriedRef {
  TimeId origin = 0;
  MemberRef ref;

  friend bool operator==(const CarriedRef&, const CarriedRef&) = default;
};

struct SaveManifest {
  TimeId time_id = 0;
  std::uint32_t page_size = kDefaultPageSize;
  std::map<std::string, MemberRef> variable_roots;
  // Inactive variables, pointing straight at the save that last wrote them.
  std::map<std::string, CarriedRef> carried_forward;
  std::vector<std::pair<PodId, PodId>> pod_edges;
  // Pods of this save that were not written: (synonym, written pod).
  std::vector<std::pair<PodId, PodId>> synonyms;
  std::map<PodId, std::vector<PageOffset>> page_tables;
  // XXH3-128 of every pod of this save, checked on load.
  std::map<PodId, Digest128> digests;

  friend bool operator==(const SaveManifest&, const SaveManifest&) = default;

  GlobalIndex global_index() const;
  std::set<PodId> pods() const;
};

// Manifest format "PMFT" + u32 version, then the fields above in order with
// maps in key order; the encoding of equal manifests is byte-identical.
inline constexpr std::uint32_t kManifestVersion = 1;
Bytes encode_manifest(const SaveManifest& m);
SaveManifest decode_manifest(std::span<const std::uint8_t> bytes);

class Backend {
 public:
  virtual ~Backend() = default;

  virtual void write_pod(PodId id, std::span<const std::uint8_t> bytes) = 0;
  virtual Bytes read_pod(PodId id) const = 0;
  virtual bool has_pod(PodId id) const = 0;
  virtual void write_manifest(TimeId t, std::span<const std::uint8_t> bytes) = 0;
  virtual Bytes read_manifest(TimeId t) const = 0;
  virtual std::vector<TimeId> list_time_ids() const = 0;
  virtual std::vector<PodId> list_pods() const = 0;
  virtual void write_meta(const std::string& text) = 0;
  // Bytes held in pods + manifests, measured from the backing medium.
  virtual std::uint64_t audit_bytes() const = 0;
  virtual std::string kind() const = 0;

  std::uint64_t pod_bytes_written() const { return pod_bytes_; }
  std::uint64_t manifest_bytes_written() const { return manifest_bytes_; }
  std::uint64_t pods_written() const { return pods_; }

 protected:
  std::uint64_t pod_bytes_ = 0;
  std::uint64_t manifest_bytes_ = 0;
  std::uint64_t pods_ = 0;
};

class MemoryBackend final : public Backend {
 public:
  void write_pod(PodId id, std::span<const std::uint8_t> bytes) override;
  Bytes read_pod(PodId id) const override;
  bool has_pod(PodId id) const override { return pods_map_.contains(id); }
  void write_manifest(TimeId t, std::span<const std::uint8_t> bytes) override;
  Bytes read_manifest(TimeId t) const override;
  std::vector<TimeId> list_time_ids() const override;
  std::vector<PodId> list_pods() const override;
  void write_meta(const std::string& text) override { meta_ = text; }
  std::uint64_t audit_bytes() const override;
  std::string kind() const override { return "mem"; }

 private:
  std::map<PodId, Bytes> pods_map_;
  std::map<TimeId, Bytes> manifests_;
  std::string meta_;
};

// Layout: <root>/pods/<time>_<serial>.pod, <root>/manifests/<time>.mft,
// <root>/store.meta.
class DirectoryBackend final : public Backend {
 public:
  explicit DirectoryBackend(std::filesystem::path root);

  void write_pod(PodId id, std::span<const std::uint8_t> bytes) override;
  Bytes read_pod(PodId id) const override;
  bool has_pod(PodId id) const override;
  void write_manifest(TimeId t, std::span<const std::uint8_t> bytes) override;
  Bytes read_manifest(TimeId t) const override;
  std::vector<TimeId> list_time_ids() const override;
  std::vector<PodId> list_pods() const override;
  void write_meta(const std::string& text) override;
  std::uint64_t audit_bytes() const override;
  std::string kind() const override { return "dir"; }

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path pod_path(PodId id) const;
  std::filesystem::path manifest_path(TimeId t) const;

 private:
  std::filesystem::path root_;
};

std::unique_ptr<Backend> make_backend(const std::string& kind, const std::string& dir = {});

void write_manifest(Backend& backend, const SaveManifest& m);
SaveManifest read_manifest(const Backend& backend, TimeId t);

}  // namespace podstore
