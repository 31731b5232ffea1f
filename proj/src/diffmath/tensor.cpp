#include "lapace/diffmath/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "lapace/error.hpp"

namespace lapace::diffmath {

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data,
               bool requires_grad)
    : shape_(std::move(shape)), data_(std::move(data)), requires_grad_(requires_grad) {
  if (shape_.size() > 2) {
    throw ShapeError("tensor rank > 2 is not supported: " + shape_string());
  }
  const std::size_t expected = std::accumulate(
      shape_.begin(), shape_.end(), std::size_t{1}, std::multiplies<>());
  if (expected != data_.size()) {
    throw ShapeError("shape " + shape_string() + " does not match " +
                     std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) {
  return Tensor({rows, cols}, std::vector<double>(rows * cols, 0.0));
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value) {
  return Tensor({rows, cols}, std::vector<double>(rows * cols, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1, 1}, {value}); }

Tensor Tensor::row(std::span<const double> values) {
  return Tensor({1, values.size()}, std::vector<double>(values.begin(), values.end()));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

std::size_t Tensor::rows() const {
  switch (shape_.size()) {
    case 0:
    case 1:
      return 1;
    default:
      return shape_[0];
  }
}

std::size_t Tensor::cols() const {
  switch (shape_.size()) {
    case 0:
      return 1;
    case 1:
      return shape_[0];
    default:
      return shape_[1];
  }
}

std::span<double> Tensor::row_span(std::size_t r) {
  return std::span<double>(data_).subspan(r * cols(), cols());
}

std::span<const double> Tensor::row_span(std::size_t r) const {
  return std::span<const double>(data_).subspan(r * cols(), cols());
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_string() const {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) out << 'x';
    out << shape_[i];
  }
  out << ']';
  return out.str();
}

}  // namespace lapace::diffmath
