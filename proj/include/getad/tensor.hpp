#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace getad {

/// Raised when operands of a tensor operation have incompatible shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string shape_string(const std::vector<std::size_t>& shape);

/// Dense row-major tensor. Rank-2 is the working rank for every compute
/// primitive; higher ranks exist only for storage.
template <class T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  BasicTensor(std::size_t rows, std::size_t cols, T fill = T{0})
      : shape_{rows, cols}, data_(rows * cols, fill) {}
  explicit BasicTensor(std::vector<std::size_t> shape, T fill = T{0})
      : shape_(std::move(shape)), data_(count(shape_), fill) {}

  static BasicTensor from(std::size_t rows, std::size_t cols, std::vector<T> values) {
    if (values.size() != rows * cols)
      throw ShapeError("tensor: " + std::to_string(values.size()) +
                       " values for shape " + shape_string({rows, cols}));
    BasicTensor t;
    t.shape_ = {rows, cols};
    t.data_ = std::move(values);
    return t;
  }
  static BasicTensor scalar(T v) { return BasicTensor(1, 1, v); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return rows() == 0 ? 0 : data_.size() / rows(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  T operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T item() const {
    if (data_.size() != 1) throw ShapeError("item: tensor of shape " + shape_string(shape_));
    return data_[0];
  }

  void reshape(std::vector<std::size_t> shape) {
    if (count(shape) != data_.size())
      throw ShapeError("reshape: " + shape_string(shape_) + " -> " + shape_string(shape));
    shape_ = std::move(shape);
  }

  template <class U>
  BasicTensor<U> cast() const {
    BasicTensor<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  bool same_shape(const BasicTensor& o) const { return shape_ == o.shape_; }
  bool operator==(const BasicTensor& o) const = default;

 private:
  static std::size_t count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }

  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

/// Parameter and checkpoint storage.
using Tensor = BasicTensor<float>;
/// Working precision on the autodiff tape.
using Tensor64 = BasicTensor<double>;

}  // namespace getad
