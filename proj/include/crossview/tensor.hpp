#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <string>
#include <vector>

#include "crossview/errors.hpp"

namespace crossview {

// Dense row-major tensor of rank 1..4. Plain value type: copy/move do what
// you expect, storage is always contiguous.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    assert(!shape_.empty() && shape_.size() <= 4);
    std::size_t n = 1;
    for (int d : shape_) {
      assert(d > 0);
      n *= static_cast<std::size_t>(d);
    }
    data_.assign(n, T(0));
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, T v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
  }

  bool empty() const { return data_.empty(); }
  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::size_t numel() const { return data_.size(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // (b, c, y, x) indexing for rank-4; lower ranks use the later arguments.
  T& at(int i0, int i1) { return data_[static_cast<std::size_t>(i0) * dim(1) + i1]; }
  const T& at(int i0, int i1) const { return data_[static_cast<std::size_t>(i0) * dim(1) + i1]; }
  T& at(int i0, int i1, int i2) {
    return data_[(static_cast<std::size_t>(i0) * dim(1) + i1) * dim(2) + i2];
  }
  const T& at(int i0, int i1, int i2) const {
    return data_[(static_cast<std::size_t>(i0) * dim(1) + i1) * dim(2) + i2];
  }
  T& at(int i0, int i1, int i2, int i3) {
    return data_[((static_cast<std::size_t>(i0) * dim(1) + i1) * dim(2) + i2) * dim(3) + i3];
  }
  const T& at(int i0, int i1, int i2, int i3) const {
    return data_[((static_cast<std::size_t>(i0) * dim(1) + i1) * dim(2) + i2) * dim(3) + i3];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void set_zero() { fill(T(0)); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (const T& v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  // Number of elements in one leading-dim slice (e.g. one batch item).
  std::size_t slice_numel() const {
    assert(rank() >= 2);
    return numel() / static_cast<std::size_t>(dim(0));
  }
  T* slice(int i) { return data() + static_cast<std::size_t>(i) * slice_numel(); }
  const T* slice(int i) const { return data() + static_cast<std::size_t>(i) * slice_numel(); }

  bool bit_equal(const Tensor& o) const {
    return shape_ == o.shape_ &&
           std::memcmp(data_.data(), o.data_.data(), data_.size() * sizeof(T)) == 0;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

 private:
  std::vector<int> shape_;
  std::vector<T> data_;
};

inline std::string shape_string(const std::vector<int>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

template <typename T>
void ensure_finite(const Tensor<T>& t, const std::string& layer) {
  if (!t.all_finite()) throw NonFiniteError(layer);
}

}  // namespace crossview
