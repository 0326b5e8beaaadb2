#include "deepagent/pipeline/feature_cache.hpp"

#include <cstring>

namespace deepagent::pipeline {

namespace {

std::uint64_t element_count(const std::vector<std::uint32_t>& dims) {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::uint64_t element_size(DType t) { return t == DType::F64 ? 8 : 4; }

}  // namespace

void FeatureCache::put(const std::string& key, const Eigen::VectorXd& values, DType dtype) {
  CacheEntry e;
  e.dtype = dtype;
  e.dims = {static_cast<std::uint32_t>(values.size())};
  e.values = values;
  put(key, std::move(e));
}

void FeatureCache::put(const std::string& key, CacheEntry entry) {
  if (key.empty()) throw UsageError("feature cache keys must be non-empty");
  if (entry.dtype != DType::F64 && entry.dtype != DType::F32) throw UsageError("unknown cache dtype for " + key);
  if (element_count(entry.dims) != static_cast<std::uint64_t>(entry.values.size()))
    throw UsageError("cache entry " + key + ": dims do not match the value count");
  if (entry.dtype == DType::F32)
    for (Eigen::Index i = 0; i < entry.values.size(); ++i)
      entry.values[i] = static_cast<double>(static_cast<float>(entry.values[i]));
  entries_[key] = std::move(entry);
}

const CacheEntry& FeatureCache::entry(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw IngestionError(source_ + ": no cache entry \"" + key + "\"");
  return it->second;
}

std::vector<std::string> FeatureCache::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : entries_) out.push_back(k);
  return out;
}

io::Bytes FeatureCache::encode() const {
  io::ByteWriter w;
  w.magic(kCacheMagic);
  w.u32(kCacheVersion);
  w.u32(static_cast<std::uint32_t>(entries_.size()));
  std::vector<std::size_t> offset_slots;
  for (const auto& [key, e] : entries_) {
    w.string(key);
    w.u32(static_cast<std::uint32_t>(e.dtype));
    w.u32(static_cast<std::uint32_t>(e.dims.size()));
    for (auto d : e.dims) w.u32(d);
    offset_slots.push_back(w.size());
    w.u64(0);
  }
  std::size_t slot = 0;
  for (const auto& [key, e] : entries_) {
    w.patch_u64(offset_slots[slot++], w.size());
    for (Eigen::Index i = 0; i < e.values.size(); ++i) {
      if (e.dtype == DType::F64) {
        w.f64(e.values[i]);
      } else {
        const float f = static_cast<float>(e.values[i]);
        w.raw(&f, sizeof f);
      }
    }
  }
  return std::move(w.bytes());
}

FeatureCache FeatureCache::decode(const io::Bytes& bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  r.expect_magic(kCacheMagic);
  const std::uint32_t version = r.u32();
  if (version != kCacheVersion)
    throw IngestionError(source + ": unsupported feature cache version " + std::to_string(version));
  const std::uint32_t count = r.u32();
  struct Pending {
    std::string key;
    CacheEntry entry;
    std::uint64_t offset;
  };
  std::vector<Pending> table;
  for (std::uint32_t i = 0; i < count; ++i) {
    Pending p;
    p.key = r.string();
    const std::uint32_t dtype = r.u32();
    if (dtype != static_cast<std::uint32_t>(DType::F64) && dtype != static_cast<std::uint32_t>(DType::F32))
      throw IngestionError(source + ": entry \"" + p.key + "\" has unknown dtype code " + std::to_string(dtype) +
                           " at byte offset " + std::to_string(r.position() - 4));
    p.entry.dtype = static_cast<DType>(dtype);
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw IngestionError(source + ": entry \"" + p.key + "\" has implausible rank " + std::to_string(rank));
    p.entry.dims.resize(rank);
    for (auto& d : p.entry.dims) d = r.u32();
    p.offset = r.u64();
    table.push_back(std::move(p));
  }

  FeatureCache cache;
  cache.source_ = source;
  std::uint64_t expected = r.position();
  for (auto& p : table) {
    if (p.offset != expected)
      throw IngestionError(source + ": entry \"" + p.key + "\" payload offset " + std::to_string(p.offset) +
                           " does not follow the previous payload at " + std::to_string(expected));
    r.seek(static_cast<std::size_t>(p.offset));
    const std::uint64_t n = element_count(p.entry.dims);
    if (n * element_size(p.entry.dtype) > bytes.size() - p.offset)
      throw IngestionError(source + ": entry \"" + p.key + "\" payload runs past the end of the file");
    p.entry.values.resize(static_cast<Eigen::Index>(n));
    for (std::uint64_t i = 0; i < n; ++i) {
      if (p.entry.dtype == DType::F64) {
        p.entry.values[static_cast<Eigen::Index>(i)] = r.f64();
      } else {
        float f;
        r.raw(&f, sizeof f);
        p.entry.values[static_cast<Eigen::Index>(i)] = f;
      }
    }
    expected = r.position();
    if (!cache.entries_.emplace(p.key, std::move(p.entry)).second)
      throw IngestionError(source + ": duplicate cache key \"" + p.key + "\"");
  }
  if (!r.at_end()) throw IngestionError(source + ": trailing bytes after the last payload");
  return cache;
}

void FeatureCache::save(const std::filesystem::path& path) const { io::write_file(path, encode()); }

FeatureCache FeatureCache::load(const std::filesystem::path& path) { return decode(io::read_file(path), path.string()); }

bool FeatureCache::operator==(const FeatureCache& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (const auto& [k, e] : entries_) {
    const auto it = other.entries_.find(k);
    if (it == other.entries_.end()) return false;
    const CacheEntry& o = it->second;
    if (o.dtype != e.dtype || o.dims != e.dims || o.values.size() != e.values.size()) return false;
    if (std::memcmp(o.values.data(), e.values.data(), sizeof(double) * static_cast<std::size_t>(e.values.size())) != 0)
      return false;
  }
  return true;
}

}  // namespace deepagent::pipeline
