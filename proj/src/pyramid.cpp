#include "gcp/pyramid.hpp"

#include <cmath>

#include "gcp/binary_io.hpp"
#include "gcp/error.hpp"
#include "gcp/parallel.hpp"
#include "gcp/simd/kernels.hpp"

namespace gcp {

PyramidHistogram build_pyramid(const LabelMap& map, std::size_t num_classes, std::span<const double> weights,
                               HistogramMode mode) {
  if (map.area() == 0) throw Error("build_pyramid: zero-area label map");
  if (num_classes == 0) throw Error("build_pyramid: no classes");
  if (!weights.empty()) {
    if (weights.size() != num_classes) throw Error("build_pyramid: weight vector length != class count");
    for (double w : weights) {
      if (!(w > 0.0) || !std::isfinite(w)) throw Error("build_pyramid: weights must be finite and > 0");
    }
  }

  // Integer counts first; level 1 is the exact sum of the nine level-2 blocks.
  std::vector<std::size_t> counts(kPyramidBlocks * num_classes, 0);
  for (std::size_t p = 0; p < kPyramidGrid; ++p) {
    const Band rows = floor_band(map.height(), kPyramidGrid, p);
    for (std::size_t q = 0; q < kPyramidGrid; ++q) {
      const Band cols = floor_band(map.width(), kPyramidGrid, q);
      std::size_t* block = counts.data() + (1 + p * kPyramidGrid + q) * num_classes;
      for (std::size_t r = rows.begin; r < rows.end; ++r) {
        const auto line = map.row(r);
        for (std::size_t c = cols.begin; c < cols.end; ++c) {
          const ClassId v = line[c];
          if (v == kUnlabeled) continue;
          if (v >= num_classes) throw Error("build_pyramid: class index " + std::to_string(v) + " out of range");
          ++block[v];
        }
      }
    }
  }
  for (std::size_t s = 1; s < kPyramidBlocks; ++s) {
    for (std::size_t c = 0; c < num_classes; ++c) counts[c] += counts[s * num_classes + c];
  }

  PyramidHistogram h;
  h.num_classes = num_classes;
  h.mode = mode;
  h.weighted = !weights.empty();
  h.values.resize(counts.size());
  for (std::size_t s = 0; s < kPyramidBlocks; ++s) {
    double* block = h.values.data() + s * num_classes;
    double total = 0.0;
    for (std::size_t c = 0; c < num_classes; ++c) {
      double v = static_cast<double>(counts[s * num_classes + c]);
      if (h.weighted) v /= weights[c];
      block[c] = v;
      total += v;
    }
    if (mode == HistogramMode::normalized && total > 0.0) {
      for (std::size_t c = 0; c < num_classes; ++c) block[c] /= total;
    }
  }
  return h;
}

double chi_square(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("chi_square: histogram lengths differ");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < 0.0 || b[i] < 0.0) throw Error("chi_square: negative histogram entry");
  }
  return simd::chi_square(a, b);
}

double ground_truth_distance(const PyramidHistogram& a, const PyramidHistogram& b) {
  if (a.num_classes != b.num_classes) {
    throw Error("ground_truth_distance: class counts differ (" + std::to_string(a.num_classes) + " vs " +
                std::to_string(b.num_classes) + ")");
  }
  if (a.mode != b.mode || a.weighted != b.weighted) {
    throw Error("ground_truth_distance: pyramids built with different histogram modes");
  }
  double total = 0.0;
  for (std::size_t s = 0; s < kPyramidBlocks; ++s) total += simd::chi_square(a.block(s), b.block(s));
  return total;
}

DistanceMatrix pairwise_distances(std::span<const PyramidHistogram> pyramids) {
  const std::size_t n = pyramids.size();
  if (n < 2) throw Error("pairwise_distances: need at least 2 images");
  DistanceMatrix m(n);
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = ground_truth_distance(pyramids[i], pyramids[j]);
      m.at(i, j) = d;
      m.at(j, i) = d;
    }
  });
  return m;
}

std::vector<PyramidHistogram> build_pyramids(const Dataset& dataset, const MetricOptions& options) {
  std::vector<double> weights;
  if (options.rare_class) weights = rare_class_weights(class_frequency(dataset, options.frequency_split));
  std::vector<PyramidHistogram> out(dataset.size());
  parallel_for(dataset.size(), [&](std::size_t i) {
    out[i] = build_pyramid(dataset.labels[i], dataset.classes.num_classes(), weights, options.mode);
  });
  return out;
}

DistanceMatrix pairwise_distances(const Dataset& dataset, const MetricOptions& options) {
  const auto pyramids = build_pyramids(dataset, options);
  return pairwise_distances(std::span<const PyramidHistogram>(pyramids));
}

std::string encode_distance_matrix(const DistanceMatrix& m) {
  io::ByteWriter w;
  w.magic("GCDM");
  w.u32(static_cast<std::uint32_t>(m.size()));
  w.f64s(m.data());
  return w.bytes();
}

DistanceMatrix decode_distance_matrix(std::string_view bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  r.expect_magic("GCDM");
  const std::uint32_t n = r.u32();
  DistanceMatrix m(n);
  std::vector<double> values(static_cast<std::size_t>(n) * n);
  r.f64s(values);
  r.expect_end();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m.at(i, j) = values[i * n + j];
  }
  return m;
}

void write_distance_matrix(const DistanceMatrix& m, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_distance_matrix(m));
}

DistanceMatrix read_distance_matrix(const std::filesystem::path& path) {
  return decode_distance_matrix(io::read_file(path), path.string());
}

}  // namespace gcp
