#ifndef ECURVE_ESTIMATORS_HPP_
#define ECURVE_ESTIMATORS_HPP_

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ecurve/data.hpp"
#include "ecurve/learners.hpp"
#include "ecurve/nuisance.hpp"

namespace ecurve {

struct SdrOptions {
  int markov_order = -1;     // -1: use the NodeSpec value
  int folds = 5;             // J
  double truncation = 50.0;  // weight cap c
  bool calibrate = true;     // isotonic constraint on the pseudo-regressions
  RatioMethod ratio = RatioMethod::classification;
  LearnerConfig learner = LearnerConfig::default_ensemble();
  std::uint64_t seed = 0;
  int threads = 1;
};

struct CurveEstimate {
  std::string estimator;
  int n_units = 0;
  std::vector<double> theta;   // theta(t+1) for t = 1..tau
  Matrix influence;            // n x tau for the SDR family, empty otherwise
  bool has_influence = false;

  // Telemetry
  int outcome_fits = 0;
  int propensity_fits = 0;
  double wall_ms = 0.0;
  double m_pred_min = 0.0, m_pred_max = 0.0;
  WeightTable weights;         // SDR family; diagnostics export
  std::string ratio_method;
};

// Per-slice predictions of the sequential regressions, evaluated at the
// observed and at the shifted treatment. Slice lambda holds
// m_{t+lambda, t} values for rows with t <= tau+1-lambda; other rows are NaN.
struct RegressionSlices {
  std::vector<std::vector<double>> obs;    // [lambda-1][row]
  std::vector<std::vector<double>> shift;  // [lambda-1][row]
};

// Evaluates the doubly robust transformation at every row with
// time <= tau+1-lambda, reading y at the end of the chain and the regression
// slices in between; cumulative weight products are accumulated left to
// right and the chain stops as soon as the product hits zero.
std::vector<double> compute_pseudo_outcomes(const LongDataset& long_data, const WeightTable& weights,
                                            const RegressionSlices& slices, int lambda);

// Oracle injection used by simulation checks: any provided piece replaces
// the corresponding fitted nuisance.
struct NuisanceOverrides {
  std::optional<std::vector<double>> g_c, g_r, r_z;  // per long row
  // m_{t+lambda, t} at a long row, at the observed or shifted treatment.
  std::function<double(int lambda, int row, bool shifted)> m;
};

// Algorithm: per-outcome sequential regression g-computation, fit on the
// wide data with full history, tau(tau-1)/2 + tau regressions in total.
CurveEstimate sequential_gcomp(const WideDataset& ds, const Policy& policy,
                               const LearnerConfig& learner, int threads = 1);

// Time-smoothed sequential regression g-computation: one pooled regression
// per diagonal of the m-grid, tau regressions in total.
CurveEstimate smoothed_gcomp(const WideDataset& ds, const Policy& policy, int markov_order,
                             const LearnerConfig& learner, int threads = 1);

// Time-smoothed sequentially doubly robust estimator with cross-fitting and
// isotonic calibration of the pseudo-regressions.
CurveEstimate smoothed_sdr(const WideDataset& ds, const Policy& policy, const SdrOptions& options,
                           const NuisanceOverrides* oracle = nullptr);

// Per-outcome SDR benchmark: the single-outcome doubly robust estimator run
// once per target time with every nuisance re-estimated, no pooling and no
// calibration step.
CurveEstimate benchmark_sdr(const WideDataset& ds, const Policy& policy, const SdrOptions& options);

}  // namespace ecurve

#endif  // ECURVE_ESTIMATORS_HPP_
