#include "gcp/encode.hpp"

#include <algorithm>
#include <type_traits>

#include "gcp/binary_io.hpp"
#include "gcp/error.hpp"
#include "gcp/simd/kernels.hpp"

namespace gcp {

template <class T>
EncoderParams<T> EncoderParams<T>::zeros(std::size_t feature_channels, std::size_t context_dim,
                                         std::size_t prior_classes, std::size_t kernel) {
  EncoderParams p;
  p.feature = AffineEncoder<T>(feature_channels, context_dim);
  p.spatial = ConvEncoder<T>(feature_channels, prior_classes, kernel);
  p.global = AffineEncoder<T>(feature_channels, prior_classes);
  p.validate();
  return p;
}

template <class T>
void EncoderParams<T>::validate() const {
  auto check_affine = [](const AffineEncoder<T>& a, const char* name) {
    if (a.weight.size() != a.out * a.in || a.bias.size() != a.out) {
      throw Error(std::string("encoder params: inconsistent ") + name + " shape");
    }
  };
  check_affine(feature, "feature");
  check_affine(global, "global");
  if (spatial.kernel % 2 == 0) throw Error("encoder params: convolution kernel must be odd");
  if (spatial.weight.size() != spatial.out * spatial.in * spatial.kernel * spatial.kernel ||
      spatial.bias.size() != spatial.out) {
    throw Error("encoder params: inconsistent spatial shape");
  }
  if (feature.out != spatial.out || feature.out != global.out) {
    throw Error("encoder params: output channel counts disagree");
  }
}

namespace {

template <class T>
std::vector<T> affine_apply(const AffineEncoder<T>& enc, std::span<const T> x) {
  if (x.size() != enc.in) {
    throw Error("encode: context length " + std::to_string(x.size()) + " != encoder input " + std::to_string(enc.in));
  }
  std::vector<T> y(enc.out);
  const std::span<const T> w(enc.weight);
  for (std::size_t o = 0; o < enc.out; ++o) y[o] = simd::dot(w.subspan(o * enc.in, enc.in), x) + enc.bias[o];
  return y;
}

template <class T>
void add_channel_bias(Tensor3<T>& t, std::span<const T> bias) {
  if (bias.size() != t.channels()) {
    throw Error("encode: bias has " + std::to_string(bias.size()) + " channels, feature map has " +
                std::to_string(t.channels()));
  }
  for (std::size_t c = 0; c < t.channels(); ++c) simd::add_scalar(bias[c], t.channel(c));
}

// Single-precision encodings accumulate in double and round once on output.
template <class To, class From>
std::vector<To> cast(const std::vector<From>& v) {
  return std::vector<To>(v.begin(), v.end());
}

template <class To, class From>
std::vector<To> cast(std::span<const From> v) {
  return std::vector<To>(v.begin(), v.end());
}

template <class To, class From>
Tensor3<To> cast(const Tensor3<From>& t) {
  return Tensor3<To>(t.channels(), t.height(), t.width(), cast<To>(t.data()));
}

template <class To, class From>
AffineEncoder<To> cast(const AffineEncoder<From>& e) {
  AffineEncoder<To> r(e.out, e.in);
  r.weight = cast<To>(e.weight);
  r.bias = cast<To>(e.bias);
  return r;
}

template <class To, class From>
ConvEncoder<To> cast(const ConvEncoder<From>& e) {
  ConvEncoder<To> r(e.out, e.in, e.kernel);
  r.weight = cast<To>(e.weight);
  r.bias = cast<To>(e.bias);
  return r;
}

}  // namespace

template <class T>
Tensor3<T> feature_encode(const Tensor3<T>& fmap, std::span<const T> context, const AffineEncoder<T>& enc) {
  if constexpr (std::is_same_v<T, float>) {
    const auto ctx = cast<double>(context);
    return cast<float>(feature_encode<double>(cast<double>(fmap), ctx, cast<double>(enc)));
  }
  const auto bias = affine_apply(enc, context);
  Tensor3<T> out = fmap;
  add_channel_bias<T>(out, bias);
  return out;
}

template <class T>
Tensor3<T> conv1x1_duplicate(const Tensor3<T>& fmap, std::span<const T> context, const AffineEncoder<T>& enc) {
  if (context.size() != enc.in) throw Error("conv1x1_duplicate: context length mismatch");
  if (fmap.channels() != enc.out) throw Error("conv1x1_duplicate: feature map channels != encoder output");
  const std::size_t Cf = fmap.channels(), F = enc.in, H = fmap.height(), W = fmap.width();

  Tensor3<T> stacked(Cf + F, H, W);
  for (std::size_t c = 0; c < Cf; ++c) std::ranges::copy(fmap.channel(c), stacked.channel(c).begin());
  for (std::size_t k = 0; k < F; ++k) std::ranges::fill(stacked.channel(Cf + k), context[k]);

  ConvEncoder<T> conv(Cf, Cf + F, 1);
  for (std::size_t o = 0; o < Cf; ++o) {
    conv.w(o, o, 0, 0) = T{1};
    for (std::size_t k = 0; k < F; ++k) conv.w(o, Cf + k, 0, 0) = enc.w(o, k);
    conv.bias[o] = enc.bias[o];
  }
  return convolve(stacked, conv);
}

template <class T>
Tensor3<T> convolve(const Tensor3<T>& input, const ConvEncoder<T>& enc) {
  if (input.channels() != enc.in) {
    throw Error("convolve: input has " + std::to_string(input.channels()) + " channels, kernel expects " +
                std::to_string(enc.in));
  }
  if (enc.kernel % 2 == 0) throw Error("convolve: kernel size must be odd");
  if constexpr (std::is_same_v<T, float>) return cast<float>(convolve(cast<double>(input), cast<double>(enc)));
  const std::size_t H = input.height(), W = input.width();
  const auto half = static_cast<std::ptrdiff_t>(enc.kernel / 2);
  Tensor3<T> out(enc.out, H, W);
  for (std::size_t o = 0; o < enc.out; ++o) {
    std::ranges::fill(out.channel(o), enc.bias[o]);
    for (std::size_t i = 0; i < enc.in; ++i) {
      for (std::size_t ky = 0; ky < enc.kernel; ++ky) {
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - half;
        for (std::size_t kx = 0; kx < enc.kernel; ++kx) {
          const T wgt = enc.w(o, i, ky, kx);
          if (wgt == T{}) continue;
          const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - half;
          // Output columns whose source column x + dx is inside the map.
          const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
          const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(W), static_cast<std::ptrdiff_t>(W) - dx);
          if (x1 <= x0) continue;
          const auto len = static_cast<std::size_t>(x1 - x0);
          for (std::size_t y = 0; y < H; ++y) {
            const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + dy;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(H)) continue;
            const T* src = &input.at(i, static_cast<std::size_t>(sy), static_cast<std::size_t>(x0 + dx));
            T* dst = &out.at(o, y, static_cast<std::size_t>(x0));
            simd::axpy(wgt, std::span<const T>(src, len), std::span<T>(dst, len));
          }
        }
      }
    }
  }
  return out;
}

template <class T>
Tensor3<T> prior_encode(const Tensor3<T>& fmap, const SpatialPrior& spatial, const GlobalPrior& global,
                        const EncoderParams<T>& params) {
  params.validate();
  if (fmap.channels() != params.spatial.out) throw Error("prior_encode: feature map channels != encoder output");
  if (spatial.num_classes() != params.spatial.in) {
    throw Error("prior_encode: spatial prior has " + std::to_string(spatial.num_classes()) +
                " channels, encoder expects " + std::to_string(params.spatial.in));
  }
  if (global.values.size() != params.global.in) {
    throw Error("prior_encode: global prior has " + std::to_string(global.values.size()) +
                " entries, encoder expects " + std::to_string(params.global.in));
  }
  const auto resized = bilinear_resize(spatial.values, fmap.height(), fmap.width());
  const auto src = resized.data();
  Tensor3<T> prior(resized.channels(), resized.height(), resized.width(), std::vector<T>(src.begin(), src.end()));
  const auto encoded = convolve(prior, params.spatial);

  Tensor3<T> out = fmap;
  auto dst = out.data();
  const auto add = encoded.data();
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += add[k];

  const std::vector<T> g(global.values.begin(), global.values.end());
  add_channel_bias<T>(out, affine_apply(params.global, std::span<const T>(g)));
  return out;
}

template struct EncoderParams<float>;
template struct EncoderParams<double>;
template Tensor3<float> feature_encode(const Tensor3<float>&, std::span<const float>, const AffineEncoder<float>&);
template Tensor3<double> feature_encode(const Tensor3<double>&, std::span<const double>, const AffineEncoder<double>&);
template Tensor3<float> conv1x1_duplicate(const Tensor3<float>&, std::span<const float>, const AffineEncoder<float>&);
template Tensor3<double> conv1x1_duplicate(const Tensor3<double>&, std::span<const double>,
                                           const AffineEncoder<double>&);
template Tensor3<float> convolve(const Tensor3<float>&, const ConvEncoder<float>&);
template Tensor3<double> convolve(const Tensor3<double>&, const ConvEncoder<double>&);
template Tensor3<float> prior_encode(const Tensor3<float>&, const SpatialPrior&, const GlobalPrior&,
                                     const EncoderParams<float>&);
template Tensor3<double> prior_encode(const Tensor3<double>&, const SpatialPrior&, const GlobalPrior&,
                                      const EncoderParams<double>&);

// ---------------------------------------------------------------------------

std::string encode_encoder_params(const EncoderParams<double>& p) {
  p.validate();
  io::ByteWriter w;
  w.magic("GCEP");
  w.u32(static_cast<std::uint32_t>(p.feature.out));
  w.u32(static_cast<std::uint32_t>(p.feature.in));
  w.u32(static_cast<std::uint32_t>(p.spatial.in));
  w.u32(static_cast<std::uint32_t>(p.spatial.kernel));
  w.u32(static_cast<std::uint32_t>(p.global.in));
  w.f64s(p.feature.weight);
  w.f64s(p.feature.bias);
  w.f64s(p.spatial.weight);
  w.f64s(p.spatial.bias);
  w.f64s(p.global.weight);
  w.f64s(p.global.bias);
  return w.bytes();
}

EncoderParams<double> decode_encoder_params(std::string_view bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  r.expect_magic("GCEP");
  const std::size_t cf = r.u32(), f = r.u32(), cp = r.u32(), k = r.u32(), cg = r.u32();
  EncoderParams<double> p;
  p.feature = AffineEncoder<double>(cf, f);
  p.spatial = ConvEncoder<double>(cf, cp, k);
  p.global = AffineEncoder<double>(cf, cg);
  r.f64s(p.feature.weight);
  r.f64s(p.feature.bias);
  r.f64s(p.spatial.weight);
  r.f64s(p.spatial.bias);
  r.f64s(p.global.weight);
  r.f64s(p.global.bias);
  r.expect_end();
  p.validate();
  return p;
}

void write_encoder_params(const EncoderParams<double>& params, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_encoder_params(params));
}

EncoderParams<double> read_encoder_params(const std::filesystem::path& path) {
  return decode_encoder_params(io::read_file(path), path.string());
}

}  // namespace gcp
