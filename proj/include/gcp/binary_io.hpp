#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace gcp::io {

// Little-endian encoder for the fixed-layout binary formats (GCPD, GCDM,
// GCEM, GCEP, GCPR).
class ByteWriter {
 public:
  void magic(std::string_view four_cc);
  void u32(std::uint32_t v);
  void f32(float v);
  void f64(double v);
  void f32s(std::span<const float> v);
  void f64s(std::span<const double> v);

  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string source)
      : bytes_(bytes), source_(std::move(source)) {}

  // Throws unless the next four bytes equal `four_cc`.
  void expect_magic(std::string_view four_cc);
  std::uint32_t u32();
  float f32();
  double f64();
  void f32s(std::span<float> out);
  void f64s(std::span<double> out);

  std::size_t remaining() const { return bytes_.size() - pos_; }
  // Throws if trailing bytes are left over.
  void expect_end() const;

 private:
  void need(std::size_t n) const;

  std::string_view bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`, so readers
// never observe a partially written output.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace gcp::io
