#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "deepagent/errors.hpp"

namespace deepagent::io {

static_assert(std::endian::native == std::endian::little, "container writers assume a little-endian host");

using Bytes = std::vector<std::uint8_t>;

class ByteWriter {
 public:
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  void magic(std::string_view m) { raw(m.data(), m.size()); }
  void u16(std::uint16_t v) { raw(&v, sizeof v); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void string(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::size_t size() const noexcept { return bytes_.size(); }
  Bytes& bytes() noexcept { return bytes_; }

  void patch_u64(std::size_t offset, std::uint64_t v) { std::memcpy(bytes_.data() + offset, &v, sizeof v); }

 private:
  Bytes bytes_;
};

/// Bounds-checked reader; failures report the byte offset.
class ByteReader {
 public:
  ByteReader(const Bytes& bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  void raw(void* out, std::size_t n) {
    if (pos_ + n > bytes_.size())
      throw IngestionError(source_ + ": truncated at byte offset " + std::to_string(pos_) + " (needed " +
                           std::to_string(n) + " more bytes)");
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  void expect_magic(std::string_view m) {
    std::string got(m.size(), '\0');
    raw(got.data(), got.size());
    if (got != m) throw IngestionError(source_ + ": bad magic, expected \"" + std::string(m) + "\"");
  }
  std::uint16_t u16() {
    std::uint16_t v;
    raw(&v, sizeof v);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    raw(&v, sizeof v);
    return v;
  }
  std::string string() {
    std::string s(u32(), '\0');
    raw(s.data(), s.size());
    return s;
  }
  std::size_t position() const noexcept { return pos_; }
  void seek(std::size_t pos) {
    if (pos > bytes_.size()) throw IngestionError(source_ + ": offset " + std::to_string(pos) + " past end of file");
    pos_ = pos;
  }
  bool at_end() const noexcept { return pos_ == bytes_.size(); }
  const std::string& source() const noexcept { return source_; }

 private:
  const Bytes& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const Bytes& bytes);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace deepagent::io
