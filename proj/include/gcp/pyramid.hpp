#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "gcp/dataset.hpp"

namespace gcp {

// Two-level spatial pyramid: block 0 is the whole image, blocks 1..9 are the
// 3x3 grid in row-major order.
inline constexpr std::size_t kPyramidBlocks = 10;
inline constexpr std::size_t kPyramidGrid = 3;

enum class HistogramMode {
  normalized,  // each non-empty block sums to 1
  raw,         // (possibly reweighted) pixel counts
};

struct PyramidHistogram {
  std::size_t num_classes = 0;
  HistogramMode mode = HistogramMode::normalized;
  bool weighted = false;
  std::vector<double> values;  // kPyramidBlocks x num_classes

  std::span<const double> block(std::size_t s) const {
    return std::span<const double>(values).subspan(s * num_classes, num_classes);
  }
};

// Half-open index range [begin, end) of band `index` when `extent` is split
// into `parts` with floor boundaries; the last band absorbs the remainder.
struct Band {
  std::size_t begin;
  std::size_t end;
};
inline Band floor_band(std::size_t extent, std::size_t parts, std::size_t index) {
  return {index * extent / parts, (index + 1) * extent / parts};
}

// Unlabeled pixels are skipped. With `weights` (size num_classes, all > 0)
// each class count is divided by weights[c] before normalization.
PyramidHistogram build_pyramid(const LabelMap& map, std::size_t num_classes,
                               std::span<const double> weights = {},
                               HistogramMode mode = HistogramMode::normalized);

// sum_c (a_c - b_c)^2 / (a_c + b_c), with 0/0 := 0. Rejects negative entries.
double chi_square(std::span<const double> a, std::span<const double> b);

// Sum of chi_square over the ten aligned blocks.
double ground_truth_distance(const PyramidHistogram& a, const PyramidHistogram& b);

class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n) : n_(n), d_(n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double at(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }
  double& at(std::size_t i, std::size_t j) { return d_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const { return std::span<const double>(d_).subspan(i * n_, n_); }
  std::span<const double> data() const { return d_; }

  bool operator==(const DistanceMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> d_;
};

// Symmetric, zero diagonal. Parallel over rows; output does not depend on the
// schedule.
DistanceMatrix pairwise_distances(std::span<const PyramidHistogram> pyramids);

struct MetricOptions {
  HistogramMode mode = HistogramMode::normalized;
  bool rare_class = false;
  std::string frequency_split = "all";  // split used for f(c)
};

std::vector<PyramidHistogram> build_pyramids(const Dataset& dataset, const MetricOptions& options = {});
DistanceMatrix pairwise_distances(const Dataset& dataset, const MetricOptions& options = {});

// "GCDM", u32 n, n*n little-endian f64 row-major.
std::string encode_distance_matrix(const DistanceMatrix& m);
DistanceMatrix decode_distance_matrix(std::string_view bytes, const std::string& source);
void write_distance_matrix(const DistanceMatrix& m, const std::filesystem::path& path);
DistanceMatrix read_distance_matrix(const std::filesystem::path& path);

}  // namespace gcp
