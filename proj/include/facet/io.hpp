#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "facet/error.hpp"

namespace facet {

// Format versions, written into every binary header and every manifest.
inline constexpr std::uint32_t kFeatureFormatVersion = 1;    // FCTF
inline constexpr std::uint32_t kLabelFormatVersion = 1;      // FCTL
inline constexpr std::uint32_t kGraphFormatVersion = 1;      // FCTG
inline constexpr std::uint32_t kCheckpointFormatVersion = 1; // FCTW

namespace io {

/// Little-endian binary reader with byte-offset error reporting. The file
/// size is known up front so headers can be validated against the payload
/// length before anything large is allocated.
class FileReader {
 public:
  explicit FileReader(const std::string& path) : path_(path) {
    std::error_code ec;
    auto size = std::filesystem::file_size(path, ec);
    if (ec) throw FormatError(path + ": cannot stat file: " + ec.message());
    size_ = static_cast<std::uint64_t>(size);
    in_.open(path, std::ios::binary);
    if (!in_) throw FormatError(path + ": cannot open for reading");
  }

  std::uint64_t size() const { return size_; }
  std::uint64_t offset() const { return offset_; }
  std::uint64_t remaining() const { return size_ - offset_; }
  const std::string& path() const { return path_; }

  void read_exact(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw FormatError(path_ + ": truncated read at byte offset " +
                        std::to_string(offset_) + ": expected " + std::to_string(n) +
                        " bytes, got " + std::to_string(in_.gcount()));
    }
    offset_ += n;
  }

  void expect_magic(const char magic[4]) {
    char buf[4];
    read_exact(buf, 4);
    if (std::memcmp(buf, magic, 4) != 0) {
      throw FormatError(path_ + ": bad magic at byte offset 0: expected \"" +
                        std::string(magic, 4) + "\", got \"" + std::string(buf, 4) +
                        "\"");
    }
  }

  std::uint32_t u32() {
    std::uint8_t b[4];
    read_exact(b, 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
  }

  std::uint64_t u64() {
    std::uint64_t lo = u32();
    std::uint64_t hi = u32();
    return lo | (hi << 32);
  }

  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }

  float f32() { return std::bit_cast<float>(u32()); }

  void f32_array(float* dst, std::size_t n) {
    // bulk read, then byte-swap if the host is big-endian
    read_exact(dst, n * 4);
    if constexpr (std::endian::native == std::endian::big) {
      auto* bytes = reinterpret_cast<std::uint8_t*>(dst);
      for (std::size_t i = 0; i < n; ++i) {
        std::swap(bytes[4 * i], bytes[4 * i + 3]);
        std::swap(bytes[4 * i + 1], bytes[4 * i + 2]);
      }
    }
  }

  /// Fail unless the bytes left equal `expected` (payload-size preflight).
  void expect_remaining(std::uint64_t expected, const std::string& what) {
    if (remaining() != expected) {
      throw FormatError(path_ + ": " + what + " at byte offset " +
                        std::to_string(offset_) + ": expected " +
                        std::to_string(expected) + " payload bytes, file has " +
                        std::to_string(remaining()));
    }
  }

 private:
  std::string path_;
  std::ifstream in_;
  std::uint64_t size_ = 0;
  std::uint64_t offset_ = 0;
};

class FileWriter {
 public:
  explicit FileWriter(const std::string& path) : path_(path) {
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw FormatError(path + ": cannot open for writing");
  }

  void write(const void* src, std::size_t n) {
    out_.write(static_cast<const char*>(src), static_cast<std::streamsize>(n));
  }

  void magic(const char m[4]) { write(m, 4); }

  void u32(std::uint32_t v) {
    std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                         static_cast<std::uint8_t>(v >> 16),
                         static_cast<std::uint8_t>(v >> 24)};
    write(b, 4);
  }

  void u64(std::uint64_t v) {
    u32(static_cast<std::uint32_t>(v));
    u32(static_cast<std::uint32_t>(v >> 32));
  }

  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }

  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  void f32_array(const float* src, std::size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
      write(src, n * 4);
    } else {
      for (std::size_t i = 0; i < n; ++i) f32(src[i]);
    }
  }

  void close() {
    out_.flush();
    if (!out_) throw FormatError(path_ + ": write failed");
    out_.close();
  }

 private:
  std::string path_;
  std::ofstream out_;
};

}  // namespace io
}  // namespace facet
