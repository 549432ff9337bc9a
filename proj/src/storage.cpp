#include "podstore/storage.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "podstore/error.hpp"
#include "wire.hpp"

namespace podstore {

namespace fs = std::filesystem;

GlobalIndex SaveManifest::global_index() const {
  GlobalIndex index(page_size);
  for (const auto& [pod, pages] : page_tables) {
    for (const PageOffset& p : pages) index.add(pod, p);
  }
  return index;
}

std::set<PodId> SaveManifest::pods() const {
  std::set<PodId> out;
  for (const auto& [id, d] : digests) out.insert(id);
  return out;
}

// --- manifest codec ----------------------------------------------------------

namespace {

constexpr std::string_view kManifestMagic = "PMFT";

void put_pod(wire::Writer& w, PodId id) {
  w.u64(id.time_id);
  w.u64(id.serial);
}

PodId get_pod(wire::Reader& r) {
  PodId id;
  id.time_id = r.u64();
  id.serial = r.u64();
  return id;
}

void put_ref(wire::Writer& w, const MemberRef& ref) {
  put_pod(w, ref.pod);
  w.u32(ref.member);
}

MemberRef get_ref(wire::Reader& r) {
  MemberRef ref;
  ref.pod = get_pod(r);
  ref.member = r.u32();
  return ref;
}

std::uint32_t get_count(wire::Reader& r, std::size_t min_entry_bytes) {
  std::uint32_t n = r.u32();
  if (n > r.remaining() / min_entry_bytes) r.fail("count exceeds manifest size");
  return n;
}

}  // namespace

Bytes encode_manifest(const SaveManifest& m) {
  wire::Writer w;
  w.raw(kManifestMagic);
  w.u32(kManifestVersion);
  w.u64(m.time_id);
  w.u32(m.page_size);

  w.u32(static_cast<std::uint32_t>(m.variable_roots.size()));
  for (const auto& [name, ref] : m.variable_roots) {
    w.str(name);
    put_ref(w, ref);
  }
  w.u32(static_cast<std::uint32_t>(m.carried_forward.size()));
  for (const auto& [name, c] : m.carried_forward) {
    w.str(name);
    w.u64(c.origin);
    put_ref(w, c.ref);
  }
  w.u32(static_cast<std::uint32_t>(m.pod_edges.size()));
  for (const auto& [a, b] : m.pod_edges) {
    put_pod(w, a);
    put_pod(w, b);
  }
  w.u32(static_cast<std::uint32_t>(m.synonyms.size()));
  for (const auto& [a, b] : m.synonyms) {
    put_pod(w, a);
    put_pod(w, b);
  }
  w.u32(static_cast<std::uint32_t>(m.page_tables.size()));
  for (const auto& [pod, pages] : m.page_tables) {
    put_pod(w, pod);
    w.u32(static_cast<std::uint32_t>(pages.size()));
    for (const PageOffset& p : pages) {
      w.u32(p.page_index);
      w.u64(p.delta);
    }
  }
  w.u32(static_cast<std::uint32_t>(m.digests.size()));
  for (const auto& [pod, d] : m.digests) {
    put_pod(w, pod);
    w.u64(d.hi);
    w.u64(d.lo);
  }
  return w.take();
}

SaveManifest decode_manifest(std::span<const std::uint8_t> bytes) {
  wire::Reader r(bytes, ErrorCode::kMalformedManifest);
  auto magic = r.raw(kManifestMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kManifestMagic.begin())) r.fail("bad manifest magic");
  if (std::uint32_t v = r.u32(); v != kManifestVersion) {
    r.fail("unsupported manifest version " + std::to_string(v));
  }
  SaveManifest m;
  m.time_id = r.u64();
  m.page_size = r.u32();
  if (m.page_size == 0) r.fail("zero page size");

  for (std::uint32_t i = 0, n = get_count(r, 24); i < n; ++i) {
    std::string name = r.str();
    MemberRef ref = get_ref(r);
    if (!m.variable_roots.emplace(std::move(name), ref).second) r.fail("duplicate variable");
  }
  for (std::uint32_t i = 0, n = get_count(r, 32); i < n; ++i) {
    std::string name = r.str();
    CarriedRef c;
    c.origin = r.u64();
    c.ref = get_ref(r);
    if (m.variable_roots.contains(name) || !m.carried_forward.emplace(std::move(name), c).second) {
      r.fail("duplicate variable");
    }
  }
  for (std::uint32_t i = 0, n = get_count(r, 32); i < n; ++i) {
    PodId a = get_pod(r);
    PodId b = get_pod(r);
    m.pod_edges.emplace_back(a, b);
  }
  for (std::uint32_t i = 0, n = get_count(r, 32); i < n; ++i) {
    PodId a = get_pod(r);
    PodId b = get_pod(r);
    m.synonyms.emplace_back(a, b);
  }
  for (std::uint32_t i = 0, n = get_count(r, 20); i < n; ++i) {
    PodId pod = get_pod(r);
    std::vector<PageOffset> pages(get_count(r, 12));
    for (PageOffset& p : pages) {
      p.page_index = r.u32();
      p.delta = r.u64();
    }
    if (!m.page_tables.emplace(pod, std::move(pages)).second) r.fail("duplicate page table");
  }
  for (std::uint32_t i = 0, n = get_count(r, 32); i < n; ++i) {
    PodId pod = get_pod(r);
    Digest128 d;
    d.hi = r.u64();
    d.lo = r.u64();
    if (!m.digests.emplace(pod, d).second) r.fail("duplicate digest");
  }
  if (!r.done()) r.fail("trailing bytes after manifest");
  return m;
}

void write_manifest(Backend& backend, const SaveManifest& m) {
  backend.write_manifest(m.time_id, encode_manifest(m));
}

SaveManifest read_manifest(const Backend& backend, TimeId t) {
  SaveManifest m = decode_manifest(backend.read_manifest(t));
  if (m.time_id != t) {
    throw Error(ErrorCode::kMalformedManifest,
                "manifest " + std::to_string(t) + " carries time id " + std::to_string(m.time_id));
  }
  return m;
}

// --- memory backend ----------------------------------------------------------

void MemoryBackend::write_pod(PodId id, std::span<const std::uint8_t> bytes) {
  if (!pods_map_.emplace(id, Bytes(bytes.begin(), bytes.end())).second) {
    throw Error(ErrorCode::kDuplicatePodId, "pod " + to_string(id) + " already written");
  }
  pod_bytes_ += bytes.size();
  ++pods_;
}

Bytes MemoryBackend::read_pod(PodId id) const {
  auto it = pods_map_.find(id);
  if (it == pods_map_.end()) throw Error(ErrorCode::kNotFound, "pod " + to_string(id));
  return it->second;
}

void MemoryBackend::write_manifest(TimeId t, std::span<const std::uint8_t> bytes) {
  if (!manifests_.emplace(t, Bytes(bytes.begin(), bytes.end())).second) {
    throw Error(ErrorCode::kInvalidArgument, "manifest " + std::to_string(t) + " already written");
  }
  manifest_bytes_ += bytes.size();
}

Bytes MemoryBackend::read_manifest(TimeId t) const {
  auto it = manifests_.find(t);
  if (it == manifests_.end()) throw Error(ErrorCode::kNotFound, "manifest " + std::to_string(t));
  return it->second;
}

std::vector<TimeId> MemoryBackend::list_time_ids() const {
  std::vector<TimeId> out;
  for (const auto& [t, b] : manifests_) out.push_back(t);
  return out;
}

std::vector<PodId> MemoryBackend::list_pods() const {
  std::vector<PodId> out;
  for (const auto& [id, b] : pods_map_) out.push_back(id);
  return out;
}

std::uint64_t MemoryBackend::audit_bytes() const {
  std::uint64_t total = 0;
  for (const auto& [id, b] : pods_map_) total += b.size();
  for (const auto& [t, b] : manifests_) total += b.size();
  return total;
}

// --- directory backend -------------------------------------------------------

namespace {

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoFailure, "cannot open " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot rename " + tmp.string() + ": " + ec.message());
}

Bytes read_file(const fs::path& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, what);
  Bytes out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kIoFailure, "cannot read " + path.string());
  return out;
}

template <typename T>
bool parse_uint(std::string_view s, T& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size() && !s.empty();
}

std::uint64_t dir_bytes(const fs::path& dir, std::string_view ext) {
  std::uint64_t total = 0;
  if (!fs::exists(dir)) return 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) total += e.file_size();
  }
  return total;
}

}  // namespace

DirectoryBackend::DirectoryBackend(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_ / "pods", ec);
  if (!ec) fs::create_directories(root_ / "manifests", ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot create store at " + root_.string());
}

fs::path DirectoryBackend::pod_path(PodId id) const {
  return root_ / "pods" / (to_string(id) + ".pod");
}

fs::path DirectoryBackend::manifest_path(TimeId t) const {
  return root_ / "manifests" / (std::to_string(t) + ".mft");
}

void DirectoryBackend::write_pod(PodId id, std::span<const std::uint8_t> bytes) {
  fs::path p = pod_path(id);
  if (fs::exists(p)) throw Error(ErrorCode::kDuplicatePodId, "pod " + to_string(id) + " already written");
  write_file(p, bytes);
  pod_bytes_ += bytes.size();
  ++pods_;
}

Bytes DirectoryBackend::read_pod(PodId id) const {
  return read_file(pod_path(id), "pod " + to_string(id));
}

bool DirectoryBackend::has_pod(PodId id) const { return fs::exists(pod_path(id)); }

void DirectoryBackend::write_manifest(TimeId t, std::span<const std::uint8_t> bytes) {
  fs::path p = manifest_path(t);
  if (fs::exists(p)) {
    throw Error(ErrorCode::kInvalidArgument, "manifest " + std::to_string(t) + " already written");
  }
  write_file(p, bytes);
  manifest_bytes_ += bytes.size();
}

Bytes DirectoryBackend::read_manifest(TimeId t) const {
  return read_file(manifest_path(t), "manifest " + std::to_string(t));
}

std::vector<TimeId> DirectoryBackend::list_time_ids() const {
  std::vector<TimeId> out;
  for (const auto& e : fs::directory_iterator(root_ / "manifests")) {
    if (e.path().extension() != ".mft") continue;
    TimeId t;
    if (parse_uint(e.path().stem().string(), t)) out.push_back(t);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<PodId> DirectoryBackend::list_pods() const {
  std::vector<PodId> out;
  for (const auto& e : fs::directory_iterator(root_ / "pods")) {
    if (e.path().extension() != ".pod") continue;
    std::string stem = e.path().stem().string();
    auto us = stem.find('_');
    PodId id;
    if (us != std::string::npos && parse_uint(std::string_view(stem).substr(0, us), id.time_id) &&
        parse_uint(std::string_view(stem).substr(us + 1), id.serial)) {
      out.push_back(id);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void DirectoryBackend::write_meta(const std::string& text) {
  write_file(root_ / "store.meta",
             std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::uint64_t DirectoryBackend::audit_bytes() const {
  return dir_bytes(root_ / "pods", ".pod") + dir_bytes(root_ / "manifests", ".mft");
}

std::unique_ptr<Backend> make_backend(const std::string& kind, const std::string& dir) {
  if (kind == "mem") return std::make_unique<MemoryBackend>();
  if (kind == "dir") {
    if (dir.empty()) throw Error(ErrorCode::kInvalidArgument, "dir backend needs a path");
    return std::make_unique<DirectoryBackend>(dir);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown backend '" + kind + "'");
}

}  // namespace podstore
