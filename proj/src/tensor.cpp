#include "lcgnn/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace lcgnn {

Tensor::Tensor(std::int64_t rows, std::int64_t cols, double fill)
    : shape{rows, cols}, values(static_cast<std::size_t>(rows * cols), fill) {
  if (rows <= 0 || cols <= 0) {
    throw std::invalid_argument("Tensor: extents must be positive, got " + shape_str());
  }
}

Tensor Tensor::scalar(double v) {
  Tensor t(1, 1);
  t.values[0] = v;
  return t;
}

Tensor Tensor::row(std::vector<double> v) {
  if (v.empty()) {
    throw std::invalid_argument("Tensor::row: empty vector");
  }
  Tensor t;
  t.shape = {1, static_cast<std::int64_t>(v.size())};
  t.values = std::move(v);
  return t;
}

std::int64_t Tensor::rows() const {
  if (shape.size() != 2) {
    throw std::logic_error("Tensor::rows: tensor is not rank-2");
  }
  return shape[0];
}

std::int64_t Tensor::cols() const {
  if (shape.size() != 2) {
    throw std::logic_error("Tensor::cols: tensor is not rank-2");
  }
  return shape[1];
}

double& Tensor::at(std::int64_t r, std::int64_t c) {
  return values[static_cast<std::size_t>(r * cols() + c)];
}

double Tensor::at(std::int64_t r, std::int64_t c) const {
  return values[static_cast<std::size_t>(r * cols() + c)];
}

double Tensor::item() const {
  if (!is_scalar()) {
    throw std::logic_error("Tensor::item: tensor has " + shape_str() + " shape, expected 1x1");
  }
  return values[0];
}

bool Tensor::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) {
      return false;
    }
  }
  return true;
}

std::string Tensor::shape_str() const {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) {
      out += "x";
    }
    out += std::to_string(shape[i]);
  }
  out += ")";
  return out;
}

}  // namespace lcgnn
