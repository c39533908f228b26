#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace adalase::io {

/// Reads a whole file. Throws FormatError if it cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Writes to `path.tmp` and renames over `path`, so readers never see a
/// partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

// Little-endian encoding helpers.
void put_u32le(std::string& out, std::uint32_t v);
void put_u64le(std::string& out, std::uint64_t v);
void put_f64le(std::string& out, double v);
void put_f32le(std::string& out, float v);

/// Bounds-checked little-endian reader over a byte buffer. Throws
/// FormatError("truncated ...") when a read runs past the end.
class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  std::uint32_t u32le();
  std::uint64_t u64le();
  std::uint32_t u32be();
  std::uint8_t u8();
  double f64le();
  float f32le();
  std::string_view take(std::size_t n);

  std::size_t remaining() const { return bytes_.size() - pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const;

  std::string_view bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace adalase::io
