#ifndef ECURVE_GBT_HPP_
#define ECURVE_GBT_HPP_

#include <cstdint>
#include <memory>
#include <vector>

#include "ecurve/common.hpp"

namespace ecurve {

enum class Loss { squared, log };

enum class GbtGrowth { depth_wise, leaf_wise };

struct GbtParams {
  int rounds = 100;
  GbtGrowth growth = GbtGrowth::depth_wise;
  int max_depth = 3;    // depth-wise growth
  int max_leaves = 31;  // leaf-wise (best-first) growth
  double learning_rate = 0.1;
  int max_bins = 64;
  int min_leaf_rows = 20;
  double min_child_hess = 1e-3;
  double lambda_l2 = 1e-6;
};

// Histogram-based gradient boosted regression trees. Squared loss boosts
// residuals directly; log loss boosts on the logit scale with sigmoid output.
// Training is deterministic: no row or feature subsampling, ties in split
// gain break toward the lowest feature and bin.
class GbtBooster {
 public:
  struct Node {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;  // go left iff x[feature] <= threshold
    int left = -1, right = -1;
    double value = 0.0;  // leaf increment, learning rate already applied
  };
  struct Tree {
    std::vector<Node> nodes;
    double eval(const double* x) const;
  };

  // Fits on the given training rows of x. The returned booster holds
  // params.rounds trees; predictions can be truncated to any prefix, so one
  // fit serves every member of a rounds-only ensemble.
  static std::shared_ptr<const GbtBooster> fit(const Matrix& x,
                                               const std::vector<double>& y,
                                               const std::vector<int>& train_rows,
                                               Loss loss, const GbtParams& params);

  double predict_row(const double* x, int n_trees) const;
  std::vector<double> predict(const Matrix& x, const std::vector<int>& rows, int n_trees) const;

  int n_trees() const { return static_cast<int>(trees_.size()); }
  Loss loss() const { return loss_; }

 private:
  Loss loss_ = Loss::squared;
  double base_score_ = 0.0;  // raw (logit for log loss)
  std::vector<Tree> trees_;
};

}  // namespace ecurve

#endif  // ECURVE_GBT_HPP_
