#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pdl/common.hpp"

namespace pdl {

// Dense row-major real64 array, rank 0 (scalar) through 2 (matrix).
// Values are immutable as far as the autodiff graph is concerned; the
// checked constructors reject NaN/Inf.
class Tensor {
 public:
  Tensor() = default;

  // Checked: throws numeric_error when data holds NaN/Inf, dim_error when
  // the data length does not match the shape.
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  // Unchecked escape hatch for op internals; callers validate separately.
  static Tensor unchecked(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double v);
  static Tensor zeros_like(const Tensor& t) { return zeros(t.shape_); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }
  // False only for a default-constructed tensor (zero-length blocks like
  // shape [B,0] are defined).
  bool defined() const;

  // Rank-2 accessors (rank-1 counts as a single row).
  std::size_t rows() const;
  std::size_t cols() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  // The single element of a scalar/1-element tensor.
  double item() const;

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;

  std::string shape_str() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Number of elements implied by a shape (empty shape -> 1, scalar).
std::size_t shape_numel(const std::vector<std::size_t>& shape);

}  // namespace pdl
