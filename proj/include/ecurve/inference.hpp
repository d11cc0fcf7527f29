#ifndef ECURVE_INFERENCE_HPP_
#define ECURVE_INFERENCE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "ecurve/common.hpp"
#include "ecurve/estimators.hpp"

namespace ecurve {

enum class MultiplierKind { rademacher, gaussian };

struct InferenceOptions {
  double alpha = 0.05;
  int bootstrap_draws = 1000;  // B
  MultiplierKind multiplier = MultiplierKind::rademacher;
  std::uint64_t seed = 0;
  int threads = 1;
  bool with_covariance = false;
};

struct InferenceResult {
  double alpha = 0.05;
  int draws = 0;
  std::string multiplier;
  std::vector<double> sigma;             // per time, unbiased sample SD of the influence values
  std::vector<double> pw_lo, pw_hi;      // theta +- z_{1-alpha/2} sigma / sqrt(n)
  double c_alpha = kMissing;             // bootstrap critical value, raw quantile
  double c_alpha_used = kMissing;        // max(c_alpha, z): the band must contain the interval
  std::vector<double> band_lo, band_hi;
  Matrix covariance;                     // optional, tau x tau
  bool has_covariance = false;
};

// Per-time intervals theta(t) +- z_{1-alpha/2} * sigma(t)/sqrt(n), sigma^2
// the unbiased sample variance of the influence column. Zero variance gives
// the degenerate point interval with a warning.
InferenceResult pointwise_ci(const Matrix& influence, const std::vector<double>& theta,
                             double alpha);

// Symmetrized sample covariance of the influence columns.
Matrix covariance(const Matrix& influence);

// Simulates max_t |M(t)| of the standardized multiplier process B times and
// returns the empirical (1-alpha) quantile (type-7) as the critical value;
// bands are theta(t) +- c * sigma(t)/sqrt(n). Zero-variance coordinates are
// excluded from the max with a warning.
InferenceResult multiplier_bootstrap(const Matrix& influence, const std::vector<double>& theta,
                                     const InferenceOptions& options);

// Full inference for a curve estimate: pointwise + uniform (+ covariance on
// request).
InferenceResult infer(const CurveEstimate& estimate, const InferenceOptions& options);

// Effect curve between two estimates on the same units: theta_a - theta_b
// with influence values phi_a - phi_b.
CurveEstimate contrast(const CurveEstimate& a, const CurveEstimate& b);

}  // namespace ecurve

#endif  // ECURVE_INFERENCE_HPP_
