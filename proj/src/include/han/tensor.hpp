#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "han/error.hpp"

namespace han {

// Dense row-major tensor. Shapes are fixed at construction; the toolkit only
// needs rank 1 and 2 in practice but serialization treats rank generically.
template <class T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    data_.assign(numel_of(shape_), T(0));
  }
  Tensor(std::size_t rows, std::size_t cols)
      : Tensor(std::vector<std::size_t>{rows, cols}) {}
  explicit Tensor(std::size_t n) : Tensor(std::vector<std::size_t>{n}) {}

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols() + c];
  }
  // Pointer to row r of a rank-2 tensor.
  T* row(std::size_t r) { return data_.data() + r * cols(); }
  const T* row(std::size_t r) const { return data_.data() + r * cols(); }

  void fill(T v) { data_.assign(data_.size(), v); }

  bool all_finite() const {
    for (const T v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  void ensure_finite(const std::string& what) const {
    if (!all_finite()) throw NumericError("non-finite values in " + what);
  }

  static std::size_t numel_of(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, std::size_t b) { return a * b; });
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

}  // namespace han
