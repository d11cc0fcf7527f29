#ifndef ECURVE_LEARNERS_HPP_
#define ECURVE_LEARNERS_HPP_

#include <memory>
#include <string>
#include <vector>

#include "ecurve/common.hpp"
#include "ecurve/data.hpp"
#include "ecurve/gbt.hpp"

namespace ecurve {

// Carrier for a single nuisance regression: outcome, predictor matrix, the
// row subset it is fit on, and the loss. groups (unit ids per row) make
// internal cross-validation splits respect the unit structure.
struct RegressionTask {
  const Matrix* x = nullptr;
  std::vector<double> y;      // aligned to x rows
  std::vector<int> rows;      // training subset
  Loss loss = Loss::squared;
  std::vector<int> groups;    // optional, aligned to x rows

  void check() const;  // finite outcome and predictors inside the subset
};

struct FitInfo {
  std::string kind;
  bool ridge_fallback = false;
  int irls_iterations = 0;
  std::vector<double> ensemble_weights;
};

class Model {
 public:
  virtual ~Model() = default;
  // Predictions for the listed rows of x, in list order. Log-loss models
  // emit probabilities clipped to [1e-6, 1-1e-6]; prediction is pure.
  virtual std::vector<double> predict_rows(const Matrix& x, const std::vector<int>& rows) const = 0;
  std::vector<double> predict(const Matrix& x) const;
  const FitInfo& info() const { return info_; }

 protected:
  FitInfo info_;
};

using ModelPtr = std::shared_ptr<const Model>;

struct LearnerConfig {
  enum class Kind { glm, gbt, intercept, saturated, ensemble };
  Kind kind = Kind::gbt;
  GbtParams gbt;
  std::vector<LearnerConfig> members;  // ensemble only
  int stack_folds = 3;                 // V for the stacking cross-validation
  std::uint64_t seed = 0;

  static LearnerConfig glm();
  static LearnerConfig gbt_rounds(int rounds);
  static LearnerConfig intercept();
  static LearnerConfig saturated();
  // The default nuisance ensemble: boosted trees at 25/50/100 rounds.
  static LearnerConfig default_ensemble();
};

// Least squares (with a flagged 1e-6 ridge fallback on rank-deficient
// designs) or logistic regression via IRLS to gradient tolerance 1e-8.
ModelPtr fit_glm(const RegressionTask& task);

ModelPtr fit_gbt(const RegressionTask& task, const GbtParams& params);

// Convex-weight stacking over the simplex (grid step 0.05), weights chosen
// by V-fold cross-validated loss; ties fall back to the best single member.
// Failed members are dropped with a warning.
ModelPtr fit_ensemble(const RegressionTask& task, const LearnerConfig& config);

ModelPtr fit_learner(const RegressionTask& task, const LearnerConfig& config);

// ---------------------------------------------------------------------------
// Unit-level cross-fitting
// ---------------------------------------------------------------------------

struct CrossFitModel {
  std::vector<ModelPtr> models;  // one per fold, trained without that fold
  FoldPartition folds;

  // Prediction for each listed row uses the model trained without the fold
  // of the row's unit.
  std::vector<double> predict_rows(const Matrix& x, const std::vector<int>& rows,
                                   const std::vector<int>& unit_of_row) const;
  std::vector<double> predict(const Matrix& x, const std::vector<int>& unit_of_row) const;
};

CrossFitModel crossfit(const RegressionTask& task, const std::vector<int>& unit_of_row,
                       const FoldPartition& folds, const LearnerConfig& config,
                       int threads = 1);

}  // namespace ecurve

#endif  // ECURVE_LEARNERS_HPP_
