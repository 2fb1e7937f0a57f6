#pragma once

#include <span>
#include <vector>

namespace lcgnn {

// Correctly-rounded double summation via nonoverlapping partials (the fsum
// scheme). The result is independent of the order in which addends arrive,
// which is what makes graph encodings bit-identical under node relabeling.
class ExactSum {
 public:
  void add(double x);
  double result() const;
  void reset() { partials_.clear(); }

 private:
  std::vector<double> partials_;
};

double exact_sum(std::span<const double> xs);

}  // namespace lcgnn
