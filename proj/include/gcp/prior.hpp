#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "gcp/dataset.hpp"
#include "gcp/tensor.hpp"

namespace gcp {

inline constexpr std::size_t kDefaultPriorGrid = 50;

using LabelMapRefs = std::vector<std::reference_wrapper<const LabelMap>>;

enum class PriorMode {
  normalized,  // per-cell class fractions averaged over the retrieval set
  raw,         // per-cell pixel counts averaged over the retrieval set
};

// C x S x S. In normalized mode every cell with labelled pixels in at least
// one retrieved map sums to 1; cells unlabelled everywhere are all zero.
struct SpatialPrior {
  Tensor3<double> values;

  std::size_t num_classes() const { return values.channels(); }
  std::size_t grid() const { return values.height(); }
};

struct GlobalPrior {
  std::vector<double> values;  // per class, in [0, 1]
};

// Cell (p, q) of a map covers rows [floor(p h / S), floor((p+1) h / S)) and
// the analogous columns of that map's own resolution. Unlabelled pixels are
// excluded from both numerator and denominator.
SpatialPrior spatial_prior(const LabelMapRefs& retrieved, std::size_t num_classes, std::size_t grid,
                           PriorMode mode = PriorMode::normalized);

// P_g[c] = sum_k N(y_k, c) / (h_k w_k K_p) for classes with include[c];
// all other entries are 0.
GlobalPrior global_prior(const LabelMapRefs& retrieved, const std::vector<bool>& include);

std::vector<bool> things_mask(const ClassTable& classes);
std::vector<bool> all_classes_mask(const ClassTable& classes);

// Per-channel bilinear interpolation, half-pixel centres, clamped edges.
Tensor3<double> bilinear_resize(const Tensor3<double>& input, std::size_t out_h, std::size_t out_w);

// "GCPR", u32 C, u32 S, u32 S, then C*S*S little-endian f32.
std::string encode_prior(const SpatialPrior& prior);
SpatialPrior decode_prior(std::string_view bytes, const std::string& source);
void write_prior(const SpatialPrior& prior, const std::filesystem::path& path);
SpatialPrior read_prior(const std::filesystem::path& path);

}  // namespace gcp
