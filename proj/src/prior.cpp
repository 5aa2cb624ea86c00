#include "gcp/prior.hpp"

#include <algorithm>
#include <cmath>

#include "gcp/binary_io.hpp"
#include "gcp/error.hpp"
#include "gcp/pyramid.hpp"

namespace gcp {

SpatialPrior spatial_prior(const LabelMapRefs& retrieved, std::size_t num_classes, std::size_t grid,
                           PriorMode mode) {
  if (retrieved.empty()) throw Error("spatial_prior: empty retrieval set");
  if (grid == 0) throw Error("spatial_prior: grid size must be positive");
  if (num_classes == 0) throw Error("spatial_prior: no classes");
  for (const LabelMap& m : retrieved) {
    if (grid > std::min(m.height(), m.width())) {
      throw Error("spatial_prior: grid " + std::to_string(grid) + " exceeds annotation size " +
                  std::to_string(m.height()) + "x" + std::to_string(m.width()));
    }
  }

  const std::size_t cells = grid * grid;
  std::vector<double> acc(num_classes * cells, 0.0);
  std::vector<std::size_t> contributors(cells, 0);
  std::vector<std::size_t> counts(num_classes);

  for (const LabelMap& m : retrieved) {
    for (std::size_t p = 0; p < grid; ++p) {
      const Band rows = floor_band(m.height(), grid, p);
      for (std::size_t q = 0; q < grid; ++q) {
        const Band cols = floor_band(m.width(), grid, q);
        std::fill(counts.begin(), counts.end(), 0);
        std::size_t labelled = 0;
        for (std::size_t r = rows.begin; r < rows.end; ++r) {
          const auto line = m.row(r);
          for (std::size_t c = cols.begin; c < cols.end; ++c) {
            const ClassId v = line[c];
            if (v == kUnlabeled) continue;
            if (v >= num_classes) throw Error("spatial_prior: class index " + std::to_string(v) + " out of range");
            ++counts[v];
            ++labelled;
          }
        }
        const std::size_t cell = p * grid + q;
        if (mode == PriorMode::raw) {
          for (std::size_t c = 1; c < num_classes; ++c) acc[c * cells + cell] += static_cast<double>(counts[c]);
        } else if (labelled > 0) {
          ++contributors[cell];
          for (std::size_t c = 1; c < num_classes; ++c) {
            acc[c * cells + cell] += static_cast<double>(counts[c]) / static_cast<double>(labelled);
          }
        }
      }
    }
  }

  SpatialPrior prior{Tensor3<double>(num_classes, grid, grid)};
  auto out = prior.values.data();
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t cell = 0; cell < cells; ++cell) {
      const std::size_t k = mode == PriorMode::raw ? retrieved.size() : contributors[cell];
      out[c * cells + cell] = k == 0 ? 0.0 : acc[c * cells + cell] / static_cast<double>(k);
    }
  }
  return prior;
}

GlobalPrior global_prior(const LabelMapRefs& retrieved, const std::vector<bool>& include) {
  if (retrieved.empty()) throw Error("global_prior: empty retrieval set");
  const std::size_t C = include.size();
  const double kp = static_cast<double>(retrieved.size());
  GlobalPrior prior;
  prior.values.assign(C, 0.0);
  std::vector<std::size_t> counts(C);
  for (const LabelMap& m : retrieved) {
    if (m.area() == 0) throw Error("global_prior: zero-area annotation");
    std::fill(counts.begin(), counts.end(), 0);
    for (ClassId v : m.labels()) {
      if (v >= C) throw Error("global_prior: class index " + std::to_string(v) + " out of range");
      ++counts[v];
    }
    const double denom = static_cast<double>(m.area()) * kp;
    for (std::size_t c = 1; c < C; ++c) {
      if (include[c]) prior.values[c] += static_cast<double>(counts[c]) / denom;
    }
  }
  return prior;
}

std::vector<bool> things_mask(const ClassTable& classes) {
  std::vector<bool> mask(classes.num_classes(), false);
  for (std::size_t c = 1; c < mask.size(); ++c) mask[c] = classes.is_things(static_cast<ClassId>(c));
  return mask;
}

std::vector<bool> all_classes_mask(const ClassTable& classes) {
  std::vector<bool> mask(classes.num_classes(), true);
  mask[kUnlabeled] = false;
  return mask;
}

namespace {

struct Tap {
  std::size_t lo;
  std::size_t hi;
  double frac;  // weight of hi
};

// Half-pixel-centre source coordinates for each output index.
std::vector<Tap> taps(std::size_t in, std::size_t out) {
  std::vector<Tap> t(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    t[i] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
  }
  return t;
}

}  // namespace

Tensor3<double> bilinear_resize(const Tensor3<double>& input, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw Error("bilinear_resize: zero target dimension");
  if (input.height() == 0 || input.width() == 0) throw Error("bilinear_resize: empty input");
  const auto ty = taps(input.height(), out_h);
  const auto tx = taps(input.width(), out_w);
  Tensor3<double> out(input.channels(), out_h, out_w);
  for (std::size_t c = 0; c < input.channels(); ++c) {
    for (std::size_t y = 0; y < out_h; ++y) {
      const Tap& a = ty[y];
      for (std::size_t x = 0; x < out_w; ++x) {
        const Tap& b = tx[x];
        const double top = input.at(c, a.lo, b.lo) * (1.0 - b.frac) + input.at(c, a.lo, b.hi) * b.frac;
        const double bottom = input.at(c, a.hi, b.lo) * (1.0 - b.frac) + input.at(c, a.hi, b.hi) * b.frac;
        out.at(c, y, x) = top * (1.0 - a.frac) + bottom * a.frac;
      }
    }
  }
  return out;
}

std::string encode_prior(const SpatialPrior& prior) {
  io::ByteWriter w;
  w.magic("GCPR");
  w.u32(static_cast<std::uint32_t>(prior.num_classes()));
  w.u32(static_cast<std::uint32_t>(prior.grid()));
  w.u32(static_cast<std::uint32_t>(prior.grid()));
  for (double v : prior.values.data()) w.f32(static_cast<float>(v));
  return w.bytes();
}

SpatialPrior decode_prior(std::string_view bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  r.expect_magic("GCPR");
  const std::uint32_t C = r.u32();
  const std::uint32_t S = r.u32();
  const std::uint32_t S2 = r.u32();
  if (S != S2) throw Error(source + ": non-square prior grid");
  std::vector<float> raw(static_cast<std::size_t>(C) * S * S);
  r.f32s(raw);
  r.expect_end();
  return SpatialPrior{Tensor3<double>(C, S, S, std::vector<double>(raw.begin(), raw.end()))};
}

void write_prior(const SpatialPrior& prior, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_prior(prior));
}

SpatialPrior read_prior(const std::filesystem::path& path) { return decode_prior(io::read_file(path), path.string()); }

}  // namespace gcp
