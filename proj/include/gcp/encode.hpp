#pragma once

#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "gcp/prior.hpp"
#include "gcp/tensor.hpp"

namespace gcp {

// Fully connected map in -> out channels: weight is out x in, row-major.
template <class T>
struct AffineEncoder {
  std::size_t out = 0;
  std::size_t in = 0;
  std::vector<T> weight;
  std::vector<T> bias;

  AffineEncoder() = default;
  AffineEncoder(std::size_t out_channels, std::size_t in_channels)
      : out(out_channels), in(in_channels), weight(out_channels * in_channels, T{}), bias(out_channels, T{}) {}

  T& w(std::size_t o, std::size_t i) { return weight[o * in + i]; }
  const T& w(std::size_t o, std::size_t i) const { return weight[o * in + i]; }
};

// k x k convolution, stride 1, zero padding k/2 (k odd): weight is
// out x in x k x k.
template <class T>
struct ConvEncoder {
  std::size_t out = 0;
  std::size_t in = 0;
  std::size_t kernel = 1;
  std::vector<T> weight;
  std::vector<T> bias;

  ConvEncoder() = default;
  ConvEncoder(std::size_t out_channels, std::size_t in_channels, std::size_t k)
      : out(out_channels),
        in(in_channels),
        kernel(k),
        weight(out_channels * in_channels * k * k, T{}),
        bias(out_channels, T{}) {}

  T& w(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) {
    return weight[((o * in + i) * kernel + ky) * kernel + kx];
  }
  const T& w(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) const {
    return weight[((o * in + i) * kernel + ky) * kernel + kx];
  }
};

template <class T>
struct EncoderParams {
  AffineEncoder<T> feature;  // context feature (F) -> C_f
  ConvEncoder<T> spatial;    // spatial prior (C) -> C_f
  AffineEncoder<T> global;   // global prior (C) -> C_f

  // Zero-initialized parameters with consistent shapes.
  static EncoderParams zeros(std::size_t feature_channels, std::size_t context_dim, std::size_t prior_classes,
                             std::size_t kernel = 1);
  void validate() const;
};

// out[c, y, x] = fmap[c, y, x] + (W context + b)[c]
template <class T>
Tensor3<T> feature_encode(const Tensor3<T>& fmap, std::span<const T> context, const AffineEncoder<T>& enc);

// The naive construction: tile the context over every position, stack it
// under fmap, and apply a 1x1 convolution with weights [I | W] and bias b.
template <class T>
Tensor3<T> conv1x1_duplicate(const Tensor3<T>& fmap, std::span<const T> context, const AffineEncoder<T>& enc);

// "same" convolution of input with enc.
template <class T>
Tensor3<T> convolve(const Tensor3<T>& input, const ConvEncoder<T>& enc);

// Resizes the spatial prior to fmap's H x W, convolves it, adds it to fmap,
// then adds the global prior through the affine path.
template <class T>
Tensor3<T> prior_encode(const Tensor3<T>& fmap, const SpatialPrior& spatial, const GlobalPrior& global,
                        const EncoderParams<T>& params);

// "GCEP", u32 C_f, u32 F, u32 C_prior, u32 kernel, u32 C_global, then f64
// parameters in order: feature W, b; spatial W, b; global W, b.
std::string encode_encoder_params(const EncoderParams<double>& params);
EncoderParams<double> decode_encoder_params(std::string_view bytes, const std::string& source);
void write_encoder_params(const EncoderParams<double>& params, const std::filesystem::path& path);
EncoderParams<double> read_encoder_params(const std::filesystem::path& path);

}  // namespace gcp
