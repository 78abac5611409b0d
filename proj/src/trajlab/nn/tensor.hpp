#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "trajlab/error.hpp"

namespace trajlab::nn {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

// Dense row-major array (last dim fastest). float for training, double for
// gradient checks.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() : dims_{1}, data_(1, T(0)) {}

  explicit BasicTensor(Shape dims, T fill = T(0)) : dims_(std::move(dims)) {
    validate_dims();
    data_.assign(shape_numel(dims_), fill);
  }

  BasicTensor(Shape dims, std::vector<T> data)
      : dims_(std::move(dims)), data_(std::move(data)) {
    validate_dims();
    if (data_.size() != shape_numel(dims_))
      fail(ErrorKind::Shape, "tensor data length " + std::to_string(data_.size()) +
                                 " does not match dims " + shape_str(dims_));
  }

  static BasicTensor vector(std::initializer_list<T> values) {
    return BasicTensor({values.size()}, std::vector<T>(values));
  }

  const Shape& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t size() const { return data_.size(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> span() { return data_; }
  std::span<const T> span() const { return data_; }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t c, std::size_t h, std::size_t w) {
    return data_[(c * dims_[1] + h) * dims_[2] + w];
  }
  const T& at(std::size_t c, std::size_t h, std::size_t w) const {
    return data_[(c * dims_[1] + h) * dims_[2] + w];
  }

  void fill(T v) { data_.assign(data_.size(), v); }

  // Same data, new dims with equal element count.
  BasicTensor reshaped(Shape dims) const { return BasicTensor(std::move(dims), data_); }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return BasicTensor<U>(dims_, std::move(out));
  }

  bool all_finite() const {
    for (const T& v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.dims_ == b.dims_ && a.data_ == b.data_;
  }

 private:
  void validate_dims() const {
    if (dims_.empty()) fail(ErrorKind::Shape, "tensor dims must be non-empty");
    for (auto d : dims_)
      if (d == 0) fail(ErrorKind::Shape, "tensor dim must be >= 1, got " + shape_str(dims_));
  }

  Shape dims_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

inline void require_rank(const Shape& dims, std::size_t rank, const char* what) {
  if (dims.size() != rank)
    fail(ErrorKind::Shape, std::string(what) + ": expected rank " + std::to_string(rank) +
                               ", got dims " + shape_str(dims));
}

inline void require_same(const Shape& a, const Shape& b, const char* what) {
  if (a != b)
    fail(ErrorKind::Shape,
         std::string(what) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

}  // namespace trajlab::nn
