#include "pdl/tensor.hpp"

#include <sstream>

#include "pdl/kernels.hpp"

namespace pdl {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data) {
  if (data.size() != shape_numel(shape)) {
    std::ostringstream os;
    os << "tensor data length " << data.size() << " does not match shape ";
    shape_ = std::move(shape);
    os << shape_str();
    throw dim_error(os.str());
  }
  shape_ = std::move(shape);
  data_ = std::move(data);
  if (!all_finite()) {
    throw numeric_error("tensor", "non-finite value at construction");
  }
}

Tensor Tensor::unchecked(std::vector<std::size_t> shape, std::vector<double> data) {
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  return t;
}

Tensor Tensor::scalar(double v) {
  return Tensor({}, {v});
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  const std::size_t n = shape_numel(shape);
  return unchecked(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
  const std::size_t n = shape_numel(shape);
  Tensor t = unchecked(std::move(shape), std::vector<double>(n, v));
  if (!t.all_finite()) throw numeric_error("tensor", "non-finite fill value");
  return t;
}

bool Tensor::defined() const { return data_.size() == shape_numel(shape_); }

std::size_t Tensor::rows() const {
  return shape_.size() == 2 ? shape_[0] : 1;
}

std::size_t Tensor::cols() const {
  if (shape_.size() == 2) return shape_[1];
  if (shape_.size() == 1) return shape_[0];
  return 1;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw contract_error("item() on tensor with " + std::to_string(numel()) +
                         " elements");
  }
  return data_[0];
}

bool Tensor::all_finite() const {
  return kernels::active().all_finite(data_.data(), data_.size());
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << 'x';
    os << shape_[i];
  }
  os << ']';
  return os.str();
}

}  // namespace pdl
