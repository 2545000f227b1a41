#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <utility>
#include <vector>

namespace nnwm {

/// Dense row-major tensor with a dynamic shape. The last index varies fastest.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<std::size_t>(count(shape_)), T{});
  }

  Tensor(std::vector<int> shape, std::vector<T> values)
      : shape_(std::move(shape)), data_(std::move(values)) {
    assert(static_cast<std::size_t>(count(shape_)) == data_.size());
  }

  static long long count(const std::vector<int>& shape) {
    long long n = 1;
    for (int d : shape) n *= d;
    return n;
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// Row-major offset of a full index tuple.
  template <typename... Ix>
  std::size_t offset(Ix... ix) const {
    assert(sizeof...(Ix) == shape_.size());
    const long long idx[] = {static_cast<long long>(ix)...};
    std::size_t off = 0;
    for (std::size_t k = 0; k < sizeof...(Ix); ++k) {
      assert(idx[k] >= 0 && idx[k] < shape_[k]);
      off = off * static_cast<std::size_t>(shape_[k]) + static_cast<std::size_t>(idx[k]);
    }
    return off;
  }

  template <typename... Ix>
  T& at(Ix... ix) {
    return data_[offset(ix...)];
  }
  template <typename... Ix>
  const T& at(Ix... ix) const {
    return data_[offset(ix...)];
  }

  void fill(T v) { data_.assign(data_.size(), v); }

  /// Reinterpret the same data under a new shape of equal element count.
  Tensor<T> reshaped(std::vector<int> shape) const {
    assert(count(shape) == static_cast<long long>(data_.size()));
    return Tensor<T>(std::move(shape), data_);
  }

  bool all_finite() const {
    for (const T& v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

 private:
  std::vector<int> shape_;
  std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace nnwm
