#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace eventnet {

// Dense row-major N-d array. float carries activations and parameters in
// production; the double instantiation backs the finite-difference test
// suites.
template <typename T>
class TensorT {
public:
  TensorT() = default;

  explicit TensorT(std::vector<int> shape, T fill = T{}) : shape_(std::move(shape)) {
    int64_t n = 1;
    for (int d : shape_) {
      if (d <= 0) throw std::invalid_argument("Tensor: dimensions must be positive");
      n *= d;
    }
    data_.assign(static_cast<size_t>(n), fill);
  }

  static TensorT zeros_like(const TensorT& other) { return TensorT(other.shape_); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // convenience accessor for rank-4 tensors (N, C, H, W)
  T& at4(int n, int c, int h, int w) { return data_[static_cast<size_t>(index4(n, c, h, w))]; }
  const T& at4(int n, int c, int h, int w) const {
    return data_[static_cast<size_t>(index4(n, c, h, w))];
  }

  int64_t index4(int n, int c, int h, int w) const {
    return ((static_cast<int64_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(T{}); }

  bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

  std::string shape_str() const {
    std::string s = "(";
    for (size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ", ";
      s += std::to_string(shape_[i]);
    }
    return s + ")";
  }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> out(shape_);
    for (int64_t i = 0; i < size(); ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
    return out;
  }

private:
  std::vector<int> shape_;
  std::vector<T> data_;
};

using Tensor = TensorT<float>;

}  // namespace eventnet
