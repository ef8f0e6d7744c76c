#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "netcast/errors.hpp"

namespace netcast {

std::size_t shape_product(const std::vector<std::size_t>& shape);

/// Dense row-major tensor of 64-bit floats. Rank 0..3 in practice.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), values_(shape_product(shape_), 0.0) {}
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  // rank-2 accessor (row, col)
  double& at(std::size_t r, std::size_t c) { return values_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * shape_[1] + c]; }
  // rank-3 accessor
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  void fill(double v) { values_.assign(values_.size(), v); }

  /// Throws errc::non_finite naming `op` if any entry is NaN or Inf.
  void ensure_finite(const char* op) const;

  std::string shape_str() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

/// A trainable value paired with its gradient accumulator.
struct Parameter {
  Tensor value;
  Tensor grad;
  std::string name;

  Parameter() = default;
  explicit Parameter(Tensor v, std::string n = "")
      : value(std::move(v)), grad(Tensor::zeros_like(value)), name(std::move(n)) {}

  void zero_grad() { grad.fill(0.0); }
  std::size_t size() const { return value.size(); }
};

}  // namespace netcast
