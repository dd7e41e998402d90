#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace flowda {

using Shape = std::vector<std::size_t>;

/// Thrown whenever operand shapes are incompatible.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown on misuse of a gradient tape (consumed tape, loss not recorded).
class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

inline std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace detail {

struct TensorStorage {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient is first accumulated
  bool requires_grad = false;

  std::vector<double>& ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/**
 * Dense row-major tensor of doubles.
 *
 * A Tensor is a handle: copies share the same storage, so a parameter held
 * by a layer and the tensor seen by the optimizer are the same object. Use
 * clone() for an independent deep copy.
 */
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
      : storage_(std::make_shared<detail::TensorStorage>()) {
    if (shape.empty()) shape = {1};
    for (auto d : shape) {
      if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
    }
    if (shape_numel(shape) != values.size()) {
      throw DimensionError("tensor shape " + shape_string(shape) + " does not match " +
                           std::to_string(values.size()) + " values");
    }
    storage_->shape = std::move(shape);
    storage_->data = std::move(values);
    storage_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }

  static Tensor full(Shape shape, double value, bool requires_grad = false) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return Tensor({1}, {value}, requires_grad);
  }

  static Tensor vector(std::vector<double> values, bool requires_grad = false) {
    auto n = values.size();
    return Tensor({n}, std::move(values), requires_grad);
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false) {
    return Tensor({rows, cols}, std::move(values), requires_grad);
  }

  bool defined() const { return static_cast<bool>(storage_); }

  const Shape& shape() const { return storage().shape; }
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const {
    if (axis >= rank()) throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_string(shape()));
    return shape()[axis];
  }
  std::size_t numel() const { return storage().data.size(); }

  std::span<const double> data() const { return storage().data; }
  std::span<double> mutable_data() { return storage().data; }

  double operator[](std::size_t flat_index) const { return storage().data[flat_index]; }

  double at(std::initializer_list<std::size_t> index) const {
    const auto& s = shape();
    if (index.size() != s.size()) throw DimensionError("index rank does not match " + shape_string(s));
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (auto i : index) {
      if (i >= s[axis]) throw DimensionError("index out of range for " + shape_string(s));
      flat = flat * s[axis] + i;
      ++axis;
    }
    return storage().data[flat];
  }

  double item() const {
    if (numel() != 1) throw DimensionError("item() requires a single-element tensor, got " + shape_string(shape()));
    return storage().data[0];
  }

  bool requires_grad() const { return storage().requires_grad; }
  Tensor& set_requires_grad(bool value) {
    storage().requires_grad = value;
    return *this;
  }

  bool has_grad() const { return storage().grad.size() == storage().data.size(); }
  std::span<const double> grad() const {
    if (!has_grad()) return {};
    return storage().grad;
  }
  std::span<double> mutable_grad() { return storage().ensure_grad(); }
  void zero_grad() { storage().grad.clear(); }

  /// Copy of the values with no gradient history.
  Tensor detach() const { return Tensor(shape(), storage().data, false); }

  /// Independent copy that keeps the requires_grad flag but not the gradient.
  Tensor clone() const { return Tensor(shape(), storage().data, requires_grad()); }

  bool is_same(const Tensor& other) const { return storage_ == other.storage_; }

  const std::shared_ptr<detail::TensorStorage>& storage_ptr() const { return storage_; }

 private:
  detail::TensorStorage& storage() const {
    if (!storage_) throw std::logic_error("use of an undefined tensor");
    return *storage_;
  }

  std::shared_ptr<detail::TensorStorage> storage_;
};

inline std::string shape_string(const Tensor& t) { return shape_string(t.shape()); }

}  // namespace flowda
