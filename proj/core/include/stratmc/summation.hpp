#pragma once

#include <cmath>

namespace stratmc {

/// Neumaier-compensated accumulator. Used wherever a sum must not depend
/// on how work is tiled or threaded (quadrature panels, replication
/// aggregation), and to keep constant integrands exact.
class NeumaierSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace stratmc
