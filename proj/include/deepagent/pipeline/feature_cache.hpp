#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "deepagent/binary_io.hpp"

namespace deepagent::pipeline {

// Tensor container:
//   "DAFT" | version u32 | entry count u32 |
//   entry table: { key (u32 length + bytes) | dtype u32 | rank u32 | dims u32[rank] | payload offset u64 } |
//   payloads, IEEE-754 little endian, in table order.
// Offsets are absolute from the start of the file.

inline constexpr char kCacheMagic[] = "DAFT";
inline constexpr std::uint32_t kCacheVersion = 1;

enum class DType : std::uint32_t { F64 = 1, F32 = 2 };

struct CacheEntry {
  DType dtype = DType::F64;
  std::vector<std::uint32_t> dims;
  Eigen::VectorXd values;  // f32 entries hold exactly representable floats
};

class FeatureCache {
 public:
  /// Stores a rank-1 entry; f32 entries are rounded to float on insertion.
  void put(const std::string& key, const Eigen::VectorXd& values, DType dtype = DType::F64);
  void put(const std::string& key, CacheEntry entry);

  bool contains(const std::string& key) const { return entries_.count(key) > 0; }
  const CacheEntry& entry(const std::string& key) const;
  /// The flattened values of `key`; IngestionError when absent.
  const Eigen::VectorXd& get(const std::string& key) const { return entry(key).values; }
  std::vector<std::string> keys() const;
  std::size_t size() const noexcept { return entries_.size(); }

  io::Bytes encode() const;
  static FeatureCache decode(const io::Bytes& bytes, const std::string& source);
  void save(const std::filesystem::path& path) const;
  static FeatureCache load(const std::filesystem::path& path);

  bool operator==(const FeatureCache& other) const;

 private:
  std::map<std::string, CacheEntry> entries_;  // sorted keys keep the encoding canonical
  std::string source_ = "<memory>";
};

}  // namespace deepagent::pipeline
