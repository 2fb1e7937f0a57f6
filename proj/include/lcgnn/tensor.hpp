#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lcgnn {

// Dense row-major tensor of 64-bit reals. Everything in the model is rank-2:
// vectors are 1 x d rows, scalars are 1 x 1.
struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::int64_t rows, std::int64_t cols, double fill = 0.0);

  static Tensor scalar(double v);
  static Tensor row(std::vector<double> v);

  std::int64_t numel() const { return static_cast<std::int64_t>(values.size()); }
  std::int64_t rows() const;
  std::int64_t cols() const;
  bool is_scalar() const { return numel() == 1; }

  double& at(std::int64_t r, std::int64_t c);
  double at(std::int64_t r, std::int64_t c) const;
  double item() const;

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;
  std::string shape_str() const;
};

}  // namespace lcgnn
