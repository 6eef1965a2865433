#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "pansharp/errors.hpp"

namespace pansharp {

// Extents of a dense tensor, up to 4 axes in (batch, channel, row, col)
// order. A zero extent is allowed only so that concat_channels has a neutral
// element; forward ops reject empty operands where it matters.
class Shape {
 public:
  Shape() = default;

  Shape(std::initializer_list<int> extents) {
    if (extents.size() > 4) throw ContractError("Shape: more than 4 axes");
    for (int e : extents) {
      if (e < 0) throw ContractError("Shape: negative extent");
      ext_[nd_++] = e;
    }
  }

  int ndim() const { return nd_; }

  int extent(int axis) const { return ext_[axis]; }

  int64_t numel() const {
    int64_t n = 1;
    for (int i = 0; i < nd_; ++i) n *= ext_[i];
    return nd_ == 0 ? 0 : n;
  }

  bool operator==(const Shape& other) const {
    if (nd_ != other.nd_) return false;
    for (int i = 0; i < nd_; ++i)
      if (ext_[i] != other.ext_[i]) return false;
    return true;
  }
  bool operator!=(const Shape& other) const { return !(*this == other); }

  std::string str() const {
    std::ostringstream os;
    os << '[';
    for (int i = 0; i < nd_; ++i) os << (i ? "," : "") << ext_[i];
    os << ']';
    return os.str();
  }

 private:
  std::array<int, 4> ext_{1, 1, 1, 1};
  int nd_ = 0;
};

// Dense tensor, contiguous, batch-major then channel, row, column.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape)
      : shape_(shape), data_(static_cast<size_t>(shape.numel()), T(0)) {}

  Tensor(Shape shape, std::vector<T> values)
      : shape_(shape), data_(std::move(values)) {
    if (static_cast<int64_t>(data_.size()) != shape_.numel())
      throw ContractError("Tensor: buffer length " +
                          std::to_string(data_.size()) +
                          " does not match shape " + shape_.str());
  }

  static Tensor full(Shape shape, T value) {
    Tensor t(shape);
    for (auto& v : t.data_) v = value;
    return t;
  }

  const Shape& shape() const { return shape_; }
  int extent(int axis) const { return shape_.extent(axis); }
  int ndim() const { return shape_.ndim(); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // 4-D accessor (batch, channel, row, col).
  T& at(int b, int c, int y, int x) {
    return data_[flat(b, c, y, x)];
  }
  const T& at(int b, int c, int y, int x) const {
    return data_[flat(b, c, y, x)];
  }

  void fill(T value) {
    for (auto& v : data_) v = value;
  }

  bool all_finite() const {
    for (const T& v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (int64_t i = 0; i < size(); ++i)
      out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
    return out;
  }

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  size_t flat(int b, int c, int y, int x) const {
    const int64_t C = shape_.extent(1), H = shape_.extent(2),
                  W = shape_.extent(3);
    return static_cast<size_t>(((static_cast<int64_t>(b) * C + c) * H + y) * W +
                               x);
  }

  Shape shape_;
  std::vector<T> data_;
};

}  // namespace pansharp
