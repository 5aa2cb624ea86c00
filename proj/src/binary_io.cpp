#include "gcp/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gcp/error.hpp"

namespace gcp::io {
namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    U out = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      out = static_cast<U>((out << 8) | ((v >> (8 * i)) & 0xFF));
    }
    return out;
  }
}

template <class T, class U>
void append(std::string& buf, T value) {
  static_assert(sizeof(T) == sizeof(U));
  U raw = to_little(std::bit_cast<U>(value));
  char bytes[sizeof(U)];
  std::memcpy(bytes, &raw, sizeof(U));
  buf.append(bytes, sizeof(U));
}

template <class T, class U>
T extract(const char* p) {
  U raw;
  std::memcpy(&raw, p, sizeof(U));
  return std::bit_cast<T>(to_little(raw));
}

}  // namespace

void ByteWriter::magic(std::string_view four_cc) { buf_.append(four_cc.substr(0, 4)); }
void ByteWriter::u32(std::uint32_t v) { append<std::uint32_t, std::uint32_t>(buf_, v); }
void ByteWriter::f32(float v) { append<float, std::uint32_t>(buf_, v); }
void ByteWriter::f64(double v) { append<double, std::uint64_t>(buf_, v); }

void ByteWriter::f32s(std::span<const float> v) {
  buf_.reserve(buf_.size() + v.size() * 4);
  for (float x : v) f32(x);
}

void ByteWriter::f64s(std::span<const double> v) {
  buf_.reserve(buf_.size() + v.size() * 8);
  for (double x : v) f64(x);
}

void ByteReader::need(std::size_t n) const {
  if (remaining() < n) {
    throw Error(source_ + ": truncated file (need " + std::to_string(n) + " more bytes at offset " +
                std::to_string(pos_) + ")");
  }
}

void ByteReader::expect_magic(std::string_view four_cc) {
  need(4);
  if (bytes_.substr(pos_, 4) != four_cc) {
    throw Error(source_ + ": bad magic, expected \"" + std::string(four_cc) + "\"");
  }
  pos_ += 4;
}

std::uint32_t ByteReader::u32() {
  need(4);
  auto v = extract<std::uint32_t, std::uint32_t>(bytes_.data() + pos_);
  pos_ += 4;
  return v;
}

float ByteReader::f32() {
  need(4);
  auto v = extract<float, std::uint32_t>(bytes_.data() + pos_);
  pos_ += 4;
  return v;
}

double ByteReader::f64() {
  need(8);
  auto v = extract<double, std::uint64_t>(bytes_.data() + pos_);
  pos_ += 8;
  return v;
}

void ByteReader::f32s(std::span<float> out) {
  need(out.size() * 4);
  for (float& x : out) x = f32();
}

void ByteReader::f64s(std::span<double> out) {
  need(out.size() * 8);
  for (double& x : out) x = f64();
}

void ByteReader::expect_end() const {
  if (remaining() != 0) {
    throw Error(source_ + ": " + std::to_string(remaining()) + " unexpected trailing bytes");
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

}  // namespace gcp::io
