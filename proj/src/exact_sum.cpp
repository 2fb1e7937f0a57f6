#include "lcgnn/exact_sum.hpp"

#include <cmath>
#include <cstddef>
#include <utility>

namespace lcgnn {

void ExactSum::add(double x) {
  std::size_t i = 0;
  for (std::size_t j = 0; j < partials_.size(); ++j) {
    double y = partials_[j];
    if (std::fabs(x) < std::fabs(y)) {
      std::swap(x, y);
    }
    const double hi = x + y;
    const double lo = y - (hi - x);
    if (lo != 0.0) {
      partials_[i++] = lo;
    }
    x = hi;
  }
  partials_.resize(i);
  partials_.push_back(x);
}

double ExactSum::result() const {
  if (partials_.empty()) {
    return 0.0;
  }
  // Partials are nonoverlapping and sorted by increasing magnitude. Fold from
  // the top; a surviving low-order remainder decides the half-ulp tie.
  std::size_t n = partials_.size();
  double hi = partials_[--n];
  double lo = 0.0;
  while (n > 0) {
    const double x = hi;
    const double y = partials_[--n];
    hi = x + y;
    const double yr = hi - x;
    lo = y - yr;
    if (lo != 0.0) {
      break;
    }
  }
  if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) || (lo > 0.0 && partials_[n - 1] > 0.0))) {
    const double y = lo * 2.0;
    const double x = hi + y;
    if (y == x - hi) {
      hi = x;
    }
  }
  return hi;
}

double exact_sum(std::span<const double> xs) {
  ExactSum acc;
  for (double v : xs) {
    acc.add(v);
  }
  return acc.result();
}

}  // namespace lcgnn
