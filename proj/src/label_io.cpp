#include "gcp/label_io.hpp"

#include <png.h>

#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>

#include "gcp/binary_io.hpp"
#include "gcp/error.hpp"

namespace gcp {
namespace {

std::string lower_ext(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

class PgmParser {
 public:
  PgmParser(std::string_view bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  LabelMap parse() {
    if (bytes_.substr(0, 2) != "P5") fail("not a binary PGM (P5)");
    pos_ = 2;
    const std::size_t width = header_int();
    const std::size_t height = header_int();
    const std::size_t maxval = header_int();
    if (width == 0 || height == 0) fail("zero-area image");
    if (maxval == 0 || maxval > 65535) fail("maxval out of range");
    if (pos_ >= bytes_.size()) fail("missing raster");
    ++pos_;  // single whitespace after maxval

    const std::size_t bpp = maxval < 256 ? 1 : 2;
    if (bytes_.size() - pos_ < width * height * bpp) fail("truncated raster");
    std::vector<ClassId> labels(width * height);
    const auto* raw = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      labels[i] = bpp == 1 ? raw[i] : static_cast<ClassId>((raw[2 * i] << 8) | raw[2 * i + 1]);
    }
    return LabelMap(height, width, std::move(labels));
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw Error(source_ + ": " + what); }

  void skip_space() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t header_int() {
    skip_space();
    std::size_t v = 0;
    bool any = false;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      if (v > (1u << 30)) fail("header value too large");
      ++pos_;
      any = true;
    }
    if (!any) fail("malformed header");
    return v;
  }

  std::string_view bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Returns an empty string on success, else the libpng diagnostic. Nothing
// with a non-trivial destructor lives across setjmp.
std::string read_png_raw(std::FILE* fp, std::size_t& width, std::size_t& height,
                         std::vector<ClassId>& labels) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return "png_create_read_struct failed";
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return "png_create_info_struct failed";
  }
  png_bytep* volatile rows = nullptr;
  unsigned char* volatile buffer = nullptr;
  if (setjmp(png_jmpbuf(png))) {
    delete[] rows;
    delete[] buffer;
    png_destroy_read_struct(&png, &info, nullptr);
    return "corrupt PNG data";
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_PALETTE) {
    png_destroy_read_struct(&png, &info, nullptr);
    return "label PNG must be single-channel grayscale or palette-indexed";
  }
  // Palette indices are the class ids; never expand to RGB.
  if (depth < 8) png_set_packing(png);
  png_read_update_info(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  const std::size_t bpp = depth == 16 ? 2 : 1;

  buffer = new unsigned char[rowbytes * h];
  rows = new png_bytep[h];
  for (png_uint_32 r = 0; r < h; ++r) rows[r] = buffer + r * rowbytes;
  png_read_image(png, rows);
  png_read_end(png, nullptr);
  delete[] rows;
  png_destroy_read_struct(&png, &info, nullptr);

  labels.assign(static_cast<std::size_t>(w) * h, 0);
  for (std::size_t r = 0; r < h; ++r) {
    const unsigned char* src = buffer + r * rowbytes;
    for (std::size_t c = 0; c < w; ++c) {
      labels[r * w + c] = bpp == 1 ? src[c] : static_cast<ClassId>((src[2 * c] << 8) | src[2 * c + 1]);
    }
  }
  delete[] buffer;
  width = w;
  height = h;
  return {};
}

std::string write_png_raw(std::FILE* fp, const LabelMap& map, int depth) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return "png_create_write_struct failed";
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return "png_create_info_struct failed";
  }
  const std::size_t bpp = depth == 16 ? 2 : 1;
  unsigned char* volatile row = nullptr;
  if (setjmp(png_jmpbuf(png))) {
    delete[] row;
    png_destroy_write_struct(&png, &info);
    return "PNG encoding failed";
  }
  row = new unsigned char[map.width() * bpp];
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(map.width()), static_cast<png_uint_32>(map.height()),
               depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < map.height(); ++r) {
    for (std::size_t c = 0; c < map.width(); ++c) {
      const ClassId v = map.at(r, c);
      if (bpp == 1) {
        row[c] = static_cast<unsigned char>(v);
      } else {
        row[2 * c] = static_cast<unsigned char>(v >> 8);
        row[2 * c + 1] = static_cast<unsigned char>(v & 0xFF);
      }
    }
    png_write_row(png, row);
  }
  png_write_end(png, nullptr);
  delete[] row;
  png_destroy_write_struct(&png, &info);
  return {};
}

}  // namespace

LabelMap read_label_map(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw Error("cannot open " + path.string());
    std::size_t w = 0, h = 0;
    std::vector<ClassId> labels;
    if (auto err = read_png_raw(fp.get(), w, h, labels); !err.empty()) {
      throw Error(path.string() + ": " + err);
    }
    if (w == 0 || h == 0) throw Error(path.string() + ": zero-area image");
    return LabelMap(h, w, std::move(labels));
  }
  if (ext == ".pgm") {
    return PgmParser(io::read_file(path), path.string()).parse();
  }
  throw Error(path.string() + ": unsupported label-map format (expected .pgm or .png)");
}

void write_label_map_pgm(const LabelMap& map, const std::filesystem::path& path) {
  const ClassId maxv = map.max_label();
  const bool wide = maxv > 255;
  std::string out = "P5\n" + std::to_string(map.width()) + " " + std::to_string(map.height()) + "\n" +
                    (wide ? "65535" : "255") + "\n";
  out.reserve(out.size() + map.area() * (wide ? 2 : 1));
  for (ClassId v : map.labels()) {
    if (wide) out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xFF));
  }
  io::write_file_atomic(path, out);
}

void write_label_map_png(const LabelMap& map, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw Error("cannot write " + path.string());
  if (auto err = write_png_raw(fp.get(), map, map.max_label() > 255 ? 16 : 8); !err.empty()) {
    throw Error(path.string() + ": " + err);
  }
}

}  // namespace gcp
