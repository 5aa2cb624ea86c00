#include "kernels_internal.hpp"

namespace gcp::simd::detail {
namespace {

double chi_square_f64(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = a[i] + b[i];
    if (s == 0.0) continue;
    const double d = a[i] - b[i];
    acc += d * d / s;
  }
  return acc;
}

template <class T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <class T>
T squared_l2(const T* a, const T* b, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

template <class T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
void add_scalar(T s, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += s;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{
      Isa::scalar,       "scalar",          chi_square_f64,  dot<double>,
      dot<float>,        squared_l2<double>, squared_l2<float>, axpy<double>,
      axpy<float>,       add_scalar<double>, add_scalar<float>,
  };
  return table;
}

}  // namespace gcp::simd::detail
