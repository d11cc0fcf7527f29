#ifndef ECURVE_ISOTONIC_HPP_
#define ECURVE_ISOTONIC_HPP_

#include <vector>

#include "ecurve/common.hpp"

namespace ecurve {

// Non-decreasing step function on the prediction scale with range clamped to
// [lo, hi]. Evaluation is right-continuous: a query maps to the block of the
// largest breakpoint <= v, with flat extension beyond either end.
struct StepFunction {
  std::vector<double> breakpoints;  // strictly increasing
  std::vector<double> values;       // non-decreasing, within [lo, hi]
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  double evaluate(double v) const;
};

// Weighted least-squares non-decreasing fit via pool-adjacent-violators.
// x must be sorted ascending; ties in x are pre-pooled by weighted mean and
// fitted values are clamped to [lo, hi] after the monotone fit.
StepFunction pava(const std::vector<double>& x, const std::vector<double>& y,
                  const std::vector<double>& w,
                  double lo = -std::numeric_limits<double>::infinity(),
                  double hi = std::numeric_limits<double>::infinity());

// Fits the monotone map g so that g(preliminary) tracks the pseudo-outcomes,
// i.e. the calibrated predictor is g composed with the preliminary model.
// With fewer than two points the calibrator is constant at the clamped
// weighted mean of the pseudo-outcomes.
StepFunction calibrate(const std::vector<double>& preliminary,
                       const std::vector<double>& pseudo_outcomes,
                       double lo, double hi,
                       const std::vector<double>* weights = nullptr);

}  // namespace ecurve

#endif  // ECURVE_ISOTONIC_HPP_
