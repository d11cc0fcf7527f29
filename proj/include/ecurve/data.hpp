#ifndef ECURVE_DATA_HPP_
#define ECURVE_DATA_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ecurve/common.hpp"

namespace ecurve {

// Generic named-column table, the raw form produced by the CSV reader.
// Missing cells are NaN.
struct Table {
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;

  std::size_t rows() const { return cols.empty() ? 0 : cols[0].size(); }
  int find(const std::string& name) const;  // -1 if absent
};

enum class OutcomeKind { numeric, survival };

// Column roles per time point for a wide-format longitudinal dataset with
// tau treatment times. Z/C/R columns cover times 1..tau, outcome columns
// cover times 2..tau+1 (y_cols[t-1] holds Y_{t+1}), covariate blocks cover
// times 1..tau (an optional tau+1 block is accepted and stored but never
// enters a regression). Baseline columns are time-invariant and visible to
// every regression regardless of the Markov order k.
struct NodeSpec {
  int tau = 0;
  int markov_order = 0;  // k, lag depth of the long-format history blocks
  OutcomeKind outcome = OutcomeKind::numeric;
  std::vector<std::string> baseline_cols;
  std::vector<std::vector<std::string>> l_cols;  // per time point
  std::vector<std::string> z_cols;
  std::vector<std::string> c_cols;
  std::vector<std::string> r_cols;
  std::vector<std::string> y_cols;

  void check() const;  // throws std::invalid_argument on a malformed spec
  int covariates_per_time() const { return l_cols.empty() ? 0 : static_cast<int>(l_cols[0].size()); }
};

// ---------------------------------------------------------------------------
// Treatment policies d(z_t, h_t, eps_t)
// ---------------------------------------------------------------------------

// Covariate values of L_t exposed to table-policy predicates.
struct PolicyContext {
  const double* l_values = nullptr;
  int l_count = 0;
};

struct PolicyTableEntry {
  double from = 0.0;
  double to = 0.0;
  // Optional predicate on one covariate of L_t: applies iff l[cov_index] >= threshold.
  int cov_index = -1;
  double threshold = 0.0;
};

struct Policy {
  enum class Kind { identity, shift, static_value, table };

  Kind kind = Kind::identity;
  double delta = 0.0;                       // shift
  double floor_at = -std::numeric_limits<double>::infinity();
  double cap_at = std::numeric_limits<double>::infinity();
  double value = 0.0;                       // static_value
  std::vector<PolicyTableEntry> table;
  std::vector<int> times;                   // empty = applies at every time
  double apply_prob = 1.0;                  // stochastic policies draw eps per (unit,time)
  std::uint64_t seed = 0;
  std::vector<double> support;              // enumerated treatment support, sorted; empty = unchecked

  bool applies_at(int t) const;
  bool is_stochastic() const { return apply_prob < 1.0; }
  // Deterministic given (z, ctx, eps).
  double apply(double z, int t, const PolicyContext& ctx, double eps) const;
  bool in_support(double z) const;

  static Policy identity();
  static Policy shift(double delta, double floor_at, double cap_at);
  static Policy static_value(double v);
};

// Uniform draw for the exogenous policy noise, one independent stream per
// (unit, time).
double policy_epsilon(const Policy& policy, int unit, int t);

// ---------------------------------------------------------------------------
// Wide dataset
// ---------------------------------------------------------------------------

class WideDataset {
 public:
  const NodeSpec& spec() const { return spec_; }
  int n_units() const { return n_; }
  int tau() const { return spec_.tau; }
  bool has_policy() const { return has_policy_; }

  // Observed values; NaN where missing.
  double z(int i, int t) const { return cell(spec_.z_cols[t - 1], i); }
  double c(int i, int t) const { return cell(spec_.c_cols[t - 1], i); }
  double r(int i, int t) const { return cell(spec_.r_cols[t - 1], i); }
  double y_next(int i, int t) const { return cell(spec_.y_cols[t - 1], i); }  // Y_{t+1}
  double l(int i, int t, int j) const { return cell(spec_.l_cols[t - 1][j], i); }
  double baseline(int i, int j) const { return cell(spec_.baseline_cols[j], i); }

  // Derived bookkeeping.
  int last_seen(int i) const { return last_seen_[i]; }          // T_i
  double at_risk(int i, int t) const { return n_risk_.at(i, t - 1); }  // N_t, t in 1..tau+1
  double z_shifted(int i, int t) const;                          // Z^d_t

  double outcome_min() const { return y_min_; }
  double outcome_max() const { return y_max_; }

  friend WideDataset validate_wide(const Table& raw, const NodeSpec& spec);
  friend WideDataset apply_policy(const WideDataset& ds, const Policy& policy);

 private:
  double cell(const std::string& name, int i) const;

  NodeSpec spec_;
  Table table_;
  std::vector<int> col_index_;   // flattened lookup built at validation
  int n_ = 0;
  std::vector<int> last_seen_;
  Matrix n_risk_;                // n x (tau+1)
  Matrix z_shift_;               // n x tau, NaN until apply_policy
  bool has_policy_ = false;
  double y_min_ = 0.0, y_max_ = 1.0;
};

// Validates a raw table against the spec, derives T_i and N_t, and
// missing-codes everything after loss to follow-up. Hard errors are thrown;
// recoverable oddities (outcome recorded where R=0, values after dropout)
// are blanked with a warning.
WideDataset validate_wide(const Table& raw, const NodeSpec& spec);

// Computes Z^d_t = d(Z_t, H_t, eps_t) for every observed (i, t); the observed
// treatments are untouched. Throws if any output falls outside the declared
// support.
WideDataset apply_policy(const WideDataset& ds, const Policy& policy);

// ---------------------------------------------------------------------------
// Long (person-period) dataset
// ---------------------------------------------------------------------------

class LongDataset {
 public:
  int n_rows() const { return static_cast<int>(unit_.size()); }
  int n_units() const { return n_units_; }
  int tau() const { return tau_; }
  int lag_order() const { return k_; }
  OutcomeKind outcome() const { return outcome_; }
  double outcome_min() const { return y_min_; }
  double outcome_max() const { return y_max_; }

  int unit(int row) const { return unit_[row]; }
  int time(int row) const { return time_[row]; }
  double y_next(int row) const { return y_next_[row]; }
  double n_cur(int row) const { return n_cur_[row]; }
  double n_next(int row) const { return n_next_[row]; }
  double c_cur(int row) const { return c_cur_[row]; }
  double r_cur(int row) const { return r_cur_[row]; }
  double z_obs(int row) const { return z_obs_[row]; }
  double z_shift(int row) const { return z_shift_[row]; }
  int covariates_per_time() const { return p_l_; }
  double l_value(int row, int lag, int j) const { return l_lags_.at(row, lag * p_l_ + j); }

  // Row of (unit, t); -1 when t exceeds the unit's last seen time.
  int row_of(int unit, int t) const;
  int last_seen(int unit) const { return last_seen_[unit]; }
  // Rows are unit-major with contiguous times 1..T_i.
  int unit_start_row(int unit) const { return start_[unit]; }

  // Predictor matrix in a fixed layout:
  //   [t] [z] [baselines] [L lag 0..k] [Z lag 1..k] [C lag 1..k] [R lag 1..k]
  // with the treatment column taken from Z (shifted=false) or Z^d. Models of
  // the treatment itself (the analytic density-ratio path) drop the z column.
  Matrix predictors(bool shifted, bool include_time = true, bool include_treatment = true) const;
  std::vector<std::string> predictor_names(bool include_time = true,
                                           bool include_treatment = true) const;

  // Full column dump for CSV export / inspection.
  Table to_table() const;

  friend LongDataset to_long(const WideDataset& ds, int k);

 private:
  int n_units_ = 0, tau_ = 0, k_ = 0, p_l_ = 0, p_b_ = 0;
  OutcomeKind outcome_ = OutcomeKind::numeric;
  double y_min_ = 0.0, y_max_ = 1.0;
  std::vector<int> unit_, time_, start_, last_seen_;
  std::vector<double> y_next_, n_cur_, n_next_, c_cur_, r_cur_, z_obs_, z_shift_;
  Matrix baseline_;   // rows x p_b
  Matrix l_lags_;     // rows x (k+1)*p_l, lag-major
  Matrix z_lags_;     // rows x k
  Matrix c_lags_;     // rows x k
  Matrix r_lags_;     // rows x k
};

// Wide-to-long transformation with Markov lag k; every unit contributes
// rows t = 1..T_i and lag cells with t-l < 1 are exactly zero.
LongDataset to_long(const WideDataset& ds, int k);

// ---------------------------------------------------------------------------
// Unit-level fold partition
// ---------------------------------------------------------------------------

struct FoldPartition {
  int n_folds = 0;
  std::vector<int> label;  // per unit, 0..J-1
  std::uint64_t seed = 0;

  int fold_of(int unit) const { return label[unit]; }
};

// Random unit-level partition into J folds of near-equal size (sizes differ
// by at most one), reproducible under the seed.
FoldPartition fold_split(int n, int j_folds, std::uint64_t seed);

}  // namespace ecurve

#endif  // ECURVE_DATA_HPP_
