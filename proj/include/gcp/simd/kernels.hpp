#pragma once

// Data-parallel inner loops shared by the metric, retrieval, embedding and
// encoding modules. Every kernel has a scalar reference implementation; an
// AVX2+FMA variant is compiled on x86-64 and selected at runtime when the CPU
// supports it. Set GCP_SIMD=scalar to force the reference path.

#include <cstddef>
#include <span>

#include "gcp/error.hpp"

namespace gcp::simd {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  const char* name;

  // sum_i (a_i - b_i)^2 / (a_i + b_i), with 0/0 := 0
  double (*chi_square_f64)(const double* a, const double* b, std::size_t n);

  double (*dot_f64)(const double* a, const double* b, std::size_t n);
  float (*dot_f32)(const float* a, const float* b, std::size_t n);

  double (*squared_l2_f64)(const double* a, const double* b, std::size_t n);
  float (*squared_l2_f32)(const float* a, const float* b, std::size_t n);

  // y += alpha * x
  void (*axpy_f64)(double alpha, const double* x, double* y, std::size_t n);
  void (*axpy_f32)(float alpha, const float* x, float* y, std::size_t n);

  // y += s
  void (*add_scalar_f64)(double s, double* y, std::size_t n);
  void (*add_scalar_f32)(float s, float* y, std::size_t n);
};

const KernelTable& scalar_kernels();

// nullptr when not compiled in or not supported by the running CPU.
const KernelTable* avx2_kernels();

// Chosen once per process: GCP_SIMD=scalar|avx2|auto (default auto).
const KernelTable& active_kernels();

namespace detail {
inline void check_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw Error(std::string(what) + ": length mismatch");
}
}  // namespace detail

inline double chi_square(std::span<const double> a, std::span<const double> b,
                         const KernelTable& k = active_kernels()) {
  detail::check_same(a.size(), b.size(), "chi_square");
  return k.chi_square_f64(a.data(), b.data(), a.size());
}

inline double dot(std::span<const double> a, std::span<const double> b,
                  const KernelTable& k = active_kernels()) {
  detail::check_same(a.size(), b.size(), "dot");
  return k.dot_f64(a.data(), b.data(), a.size());
}

inline float dot(std::span<const float> a, std::span<const float> b,
                 const KernelTable& k = active_kernels()) {
  detail::check_same(a.size(), b.size(), "dot");
  return k.dot_f32(a.data(), b.data(), a.size());
}

inline double squared_l2(std::span<const double> a, std::span<const double> b,
                         const KernelTable& k = active_kernels()) {
  detail::check_same(a.size(), b.size(), "squared_l2");
  return k.squared_l2_f64(a.data(), b.data(), a.size());
}

inline float squared_l2(std::span<const float> a, std::span<const float> b,
                        const KernelTable& k = active_kernels()) {
  detail::check_same(a.size(), b.size(), "squared_l2");
  return k.squared_l2_f32(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y,
                 const KernelTable& k = active_kernels()) {
  detail::check_same(x.size(), y.size(), "axpy");
  k.axpy_f64(alpha, x.data(), y.data(), x.size());
}

inline void axpy(float alpha, std::span<const float> x, std::span<float> y,
                 const KernelTable& k = active_kernels()) {
  detail::check_same(x.size(), y.size(), "axpy");
  k.axpy_f32(alpha, x.data(), y.data(), x.size());
}

inline void add_scalar(double s, std::span<double> y, const KernelTable& k = active_kernels()) {
  k.add_scalar_f64(s, y.data(), y.size());
}

inline void add_scalar(float s, std::span<float> y, const KernelTable& k = active_kernels()) {
  k.add_scalar_f32(s, y.data(), y.size());
}

}  // namespace gcp::simd
