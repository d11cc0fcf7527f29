#ifndef ECURVE_NUISANCE_HPP_
#define ECURVE_NUISANCE_HPP_

#include <string>
#include <vector>

#include "ecurve/data.hpp"
#include "ecurve/learners.hpp"

namespace ecurve {

// Cross-fitted censoring propensity P(C_t=1 | t, Z_t, H_t) per long row,
// clipped to [1e-6, 1]. A degenerate target (no variation in C) yields the
// constant itself, exactly, with a warning.
std::vector<double> fit_censoring(const LongDataset& long_data, const FoldPartition& folds,
                                  const LearnerConfig& learner, int threads = 1);

// Cross-fitted measurement propensity P(R_t=1 | t, Z_t, H_t, C_{t-1}=1).
// Long rows exist only while C_{t-1}=1, so the conditioning subset is the
// whole long table.
std::vector<double> fit_missingness(const LongDataset& long_data, const FoldPartition& folds,
                                    const LearnerConfig& learner, int threads = 1);

enum class RatioMethod { classification, categorical_analytic };

struct DensityRatioEstimates {
  std::vector<double> r;  // per long row, >= 0 and finite
  std::string method;
};

// Density ratio of the post-intervention to the observational treatment
// density at the observed treatment. The classification path stacks observed
// rows (label 0) with shifted rows (label 1), cross-fits a classifier with
// fold labels following the unit, and returns p/(1-p). The analytic path,
// available for an enumerable treatment support, fits a categorical model of
// g_Z one level at a time and evaluates the intervened density as a sum over
// levels mapped by the policy.
DensityRatioEstimates estimate_density_ratio(const LongDataset& long_data, const Policy& policy,
                                             const FoldPartition& folds,
                                             const LearnerConfig& learner, RatioMethod method,
                                             int threads = 1);

// One multiplicative reweighting factor per long row:
//   base: r * I(C=1)/g_C           (time s strictly before the target)
//   diag: base * I(R=1)/g_R        (time s equal to the target)
// each truncated at cap.
struct WeightTable {
  std::vector<double> base;
  std::vector<double> diag;
  double cap = 0.0;

  struct TimeSummary {
    int time = 0;
    double mean_base = 0.0, max_base = 0.0, frac_trunc_base = 0.0;
    double mean_diag = 0.0, max_diag = 0.0, frac_trunc_diag = 0.0;
    int positive_base = 0, truncated_base = 0;
  };
  std::vector<TimeSummary> by_time;

  // w_{t,s} for a row observed at time s given target time t.
  double at(int target_t, int s, int row) const { return s == target_t ? diag[row] : base[row]; }
};

// Scalar form of the reweighting factor; the R-part enters only when the
// regression time equals the target time.
double weight_factor(double r_z, double c_ind, double g_c, double r_ind, double g_r,
                     bool include_r_factor, double cap);

WeightTable compute_weights(const LongDataset& long_data, const std::vector<double>& g_c,
                            const std::vector<double>& g_r, const std::vector<double>& r_z,
                            double cap);

}  // namespace ecurve

#endif  // ECURVE_NUISANCE_HPP_
