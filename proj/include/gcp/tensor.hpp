#pragma once

#include <span>
#include <vector>

#include "gcp/error.hpp"

namespace gcp {

// Dense channels x height x width tensor, row-major within a channel.
template <class T>
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t channels, std::size_t height, std::size_t width, T fill = T{})
      : c_(channels), h_(height), w_(width), data_(channels * height * width, fill) {}
  Tensor3(std::size_t channels, std::size_t height, std::size_t width, std::vector<T> data)
      : c_(channels), h_(height), w_(width), data_(std::move(data)) {
    if (data_.size() != c_ * h_ * w_) throw Error("Tensor3: data size does not match shape");
  }

  std::size_t channels() const { return c_; }
  std::size_t height() const { return h_; }
  std::size_t width() const { return w_; }
  std::size_t plane() const { return h_ * w_; }

  T& at(std::size_t c, std::size_t y, std::size_t x) { return data_[(c * h_ + y) * w_ + x]; }
  const T& at(std::size_t c, std::size_t y, std::size_t x) const { return data_[(c * h_ + y) * w_ + x]; }

  std::span<T> channel(std::size_t c) { return std::span<T>(data_).subspan(c * plane(), plane()); }
  std::span<const T> channel(std::size_t c) const { return std::span<const T>(data_).subspan(c * plane(), plane()); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  bool same_shape(const Tensor3& o) const { return c_ == o.c_ && h_ == o.h_ && w_ == o.w_; }
  bool operator==(const Tensor3&) const = default;

 private:
  std::size_t c_ = 0, h_ = 0, w_ = 0;
  std::vector<T> data_;
};

}  // namespace gcp
