#include "ecurve/data.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace ecurve {

int Table::find(const std::string& name) const {
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (names[j] == name) return static_cast<int>(j);
  }
  return -1;
}

namespace {

bool is_binary(double v) { return v == 0.0 || v == 1.0; }

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

}  // namespace

void NodeSpec::check() const {
  if (tau < 1) fail("NodeSpec: tau must be >= 1");
  if (markov_order < 0 || markov_order > tau) fail("NodeSpec: require 0 <= k <= tau");
  auto expect_len = [&](const std::vector<std::string>& v, const char* what) {
    if (static_cast<int>(v.size()) != tau) {
      std::ostringstream os;
      os << "NodeSpec: expected " << tau << " " << what << " columns, got " << v.size();
      fail(os.str());
    }
  };
  expect_len(z_cols, "Z");
  expect_len(c_cols, "C");
  expect_len(r_cols, "R");
  expect_len(y_cols, "Y");
  if (static_cast<int>(l_cols.size()) != tau && static_cast<int>(l_cols.size()) != tau + 1) {
    fail("NodeSpec: expected tau (or tau+1) covariate blocks");
  }
  for (std::size_t t = 1; t < std::min<std::size_t>(l_cols.size(), tau); ++t) {
    if (l_cols[t].size() != l_cols[0].size()) {
      fail("NodeSpec: covariate blocks must have equal width across times 1..tau");
    }
  }
  std::set<std::string> seen;
  auto add = [&](const std::string& name) {
    if (!seen.insert(name).second) fail("NodeSpec: column '" + name + "' appears in two roles");
  };
  for (const auto& v : {z_cols, c_cols, r_cols, y_cols, baseline_cols}) {
    for (const auto& s : v) add(s);
  }
  for (const auto& block : l_cols) {
    for (const auto& s : block) add(s);
  }
}

// ---------------------------------------------------------------------------
// Policy
// ---------------------------------------------------------------------------

bool Policy::applies_at(int t) const {
  if (times.empty()) return true;
  return std::find(times.begin(), times.end(), t) != times.end();
}

bool Policy::in_support(double z) const {
  if (support.empty()) return true;
  for (double s : support) {
    if (std::fabs(s - z) < 1e-9) return true;
  }
  return false;
}

double Policy::apply(double z, int t, const PolicyContext& ctx, double eps) const {
  if (!applies_at(t)) return z;
  if (apply_prob < 1.0 && eps >= apply_prob) return z;
  switch (kind) {
    case Kind::identity:
      return z;
    case Kind::shift:
      return clamp(z + delta, floor_at, cap_at);
    case Kind::static_value:
      return value;
    case Kind::table:
      for (const auto& e : table) {
        if (std::fabs(e.from - z) >= 1e-9) continue;
        if (e.cov_index >= 0) {
          if (e.cov_index >= ctx.l_count) fail("Policy: predicate covariate index out of range");
          if (ctx.l_values[e.cov_index] < e.threshold) continue;
        }
        return e.to;
      }
      return z;
  }
  return z;
}

Policy Policy::identity() { return Policy{}; }

Policy Policy::shift(double delta, double floor_at, double cap_at) {
  Policy p;
  p.kind = Kind::shift;
  p.delta = delta;
  p.floor_at = floor_at;
  p.cap_at = cap_at;
  return p;
}

Policy Policy::static_value(double v) {
  Policy p;
  p.kind = Kind::static_value;
  p.value = v;
  return p;
}

double policy_epsilon(const Policy& policy, int unit, int t) {
  Rng rng(derive_seed(policy.seed, static_cast<std::uint64_t>(unit),
                      static_cast<std::uint64_t>(t)));
  return rng.uniform();
}

// ---------------------------------------------------------------------------
// WideDataset
// ---------------------------------------------------------------------------

double WideDataset::cell(const std::string& name, int i) const {
  const int j = table_.find(name);
  if (j < 0) fail("WideDataset: unknown column '" + name + "'");
  return table_.cols[j][i];
}

double WideDataset::z_shifted(int i, int t) const {
  if (!has_policy_) fail("WideDataset: apply_policy has not been run");
  return z_shift_.at(i, t - 1);
}

WideDataset validate_wide(const Table& raw, const NodeSpec& spec) {
  spec.check();

  WideDataset ds;
  ds.spec_ = spec;
  ds.table_ = raw;
  ds.n_ = static_cast<int>(raw.rows());
  const int tau = spec.tau;

  // All referenced columns must exist.
  std::vector<std::string> all;
  for (const auto& v : {spec.z_cols, spec.c_cols, spec.r_cols, spec.y_cols, spec.baseline_cols}) {
    all.insert(all.end(), v.begin(), v.end());
  }
  for (const auto& block : spec.l_cols) all.insert(all.end(), block.begin(), block.end());
  for (const auto& name : all) {
    if (raw.find(name) < 0) fail("validate_wide: missing column '" + name + "'");
  }

  auto& cols = ds.table_.cols;
  auto col = [&](const std::string& name) -> std::vector<double>& {
    return cols[ds.table_.find(name)];
  };

  const int n = ds.n_;
  ds.last_seen_.assign(n, tau);
  ds.n_risk_ = Matrix(n, tau + 1, 1.0);
  ds.z_shift_ = Matrix(n, tau, kMissing);

  std::uint64_t blanked = 0;
  std::uint64_t ignored_y = 0;

  for (int i = 0; i < n; ++i) {
    // Censoring scan: C must be binary until the first zero, zero-or-missing
    // afterwards; T_i is the first time with C_t = 0.
    int t_last = tau;
    bool censored = false;
    for (int t = 1; t <= tau; ++t) {
      double cv = col(spec.c_cols[t - 1])[i];
      if (!censored) {
        if (is_missing(cv) || !is_binary(cv)) {
          std::ostringstream os;
          os << "validate_wide: unit " << i << ": C at time " << t << " is not 0/1";
          fail(os.str());
        }
        if (cv == 0.0) {
          censored = true;
          t_last = t;
        }
      } else {
        if (!is_missing(cv) && cv == 1.0) {
          std::ostringstream os;
          os << "validate_wide: unit " << i << ": non-monotone censoring at time " << t;
          fail(os.str());
        }
        col(spec.c_cols[t - 1])[i] = kMissing;
      }
    }
    ds.last_seen_[i] = t_last;

    // Blank everything past the record end.
    for (int t = t_last + 1; t <= tau; ++t) {
      auto blank = [&](const std::string& name) {
        double& v = col(name)[i];
        if (!is_missing(v)) {
          v = kMissing;
          ++blanked;
        }
      };
      blank(spec.z_cols[t - 1]);
      blank(spec.r_cols[t - 1]);
      blank(spec.y_cols[t - 1]);
      if (t <= static_cast<int>(spec.l_cols.size())) {
        for (const auto& name : spec.l_cols[t - 1]) blank(name);
      }
    }
    if (t_last < tau) {
      double& ylast = col(spec.y_cols[t_last - 1])[i];  // Y_{t_last+1} unobservable
      if (!is_missing(ylast)) {
        ylast = kMissing;
        ++blanked;
      }
    }

    // Covariates and treatments must be present while the unit is in view.
    for (int j = 0; j < static_cast<int>(spec.baseline_cols.size()); ++j) {
      if (is_missing(col(spec.baseline_cols[j])[i])) {
        fail("validate_wide: unit " + std::to_string(i) + ": missing baseline covariate");
      }
    }
    for (int t = 1; t <= t_last; ++t) {
      if (is_missing(col(spec.z_cols[t - 1])[i])) {
        fail("validate_wide: unit " + std::to_string(i) + ": missing Z at time " + std::to_string(t));
      }
      for (const auto& name : spec.l_cols[t - 1]) {
        if (is_missing(col(name)[i])) {
          fail("validate_wide: unit " + std::to_string(i) + ": missing covariate at time " + std::to_string(t));
        }
      }
    }

    // Measurement indicators: binary wherever the unit is still under
    // follow-up; at the dropout time R is forced to 0.
    for (int t = 1; t <= t_last; ++t) {
      double& rv = col(spec.r_cols[t - 1])[i];
      const double cv = col(spec.c_cols[t - 1])[i];
      if (cv == 1.0) {
        if (is_missing(rv) || !is_binary(rv)) {
          std::ostringstream os;
          os << "validate_wide: unit " << i << ": R at time " << t << " is not 0/1";
          fail(os.str());
        }
      } else {
        rv = 0.0;
      }
      if (rv == 0.0) {
        double& yv = col(spec.y_cols[t - 1])[i];
        if (!is_missing(yv)) {
          yv = kMissing;
          ++ignored_y;
        }
      }
    }

    // At-risk indicators: a survival unit leaves the risk set at the first
    // recorded event (Y_s = 0) and stays out from then on.
    if (spec.outcome == OutcomeKind::survival) {
      bool event = false;
      for (int t = 2; t <= tau + 1; ++t) {
        if (!event) {
          const double yv = col(spec.y_cols[t - 2])[i];
          if (!is_missing(yv)) {
            if (!is_binary(yv)) {
              fail("validate_wide: unit " + std::to_string(i) + ": survival outcome is not 0/1");
            }
            if (yv == 0.0) event = true;
          }
        }
        if (event) ds.n_risk_.at(i, t - 1) = 0.0;
      }
    }

    // Outcomes must be there when they were measured on an at-risk unit.
    for (int t = 1; t <= t_last; ++t) {
      const double cv = col(spec.c_cols[t - 1])[i];
      const double rv = col(spec.r_cols[t - 1])[i];
      if (cv == 1.0 && rv == 1.0 && ds.n_risk_.at(i, t - 1) == 1.0 &&
          is_missing(col(spec.y_cols[t - 1])[i])) {
        std::ostringstream os;
        os << "validate_wide: unit " << i << ": Y at time " << (t + 1)
           << " is missing although C=N=R=1";
        fail(os.str());
      }
    }
  }

  if (blanked > 0) {
    warn("validate_wide: " + std::to_string(blanked) +
         " post-dropout cells were non-missing and have been blanked");
  }
  if (ignored_y > 0) {
    warn("validate_wide: " + std::to_string(ignored_y) +
         " outcome values recorded where R=0 were ignored");
  }

  // Observed outcome range, used as the calibration clamp for numeric outcomes.
  double ymin = std::numeric_limits<double>::infinity();
  double ymax = -std::numeric_limits<double>::infinity();
  for (int t = 1; t <= tau; ++t) {
    for (int i = 0; i < n; ++i) {
      const double yv = col(spec.y_cols[t - 1])[i];
      if (!is_missing(yv)) {
        ymin = std::min(ymin, yv);
        ymax = std::max(ymax, yv);
      }
    }
  }
  if (!(ymin <= ymax)) {
    ymin = 0.0;
    ymax = 1.0;
  }
  if (spec.outcome == OutcomeKind::survival) {
    ymin = 0.0;
    ymax = 1.0;
  }
  ds.y_min_ = ymin;
  ds.y_max_ = ymax;
  return ds;
}

WideDataset apply_policy(const WideDataset& ds, const Policy& policy) {
  WideDataset out = ds;
  const int tau = ds.tau();
  const int p_l = ds.spec().covariates_per_time();
  std::vector<double> lvals(std::max(1, p_l));
  for (int i = 0; i < ds.n_units(); ++i) {
    for (int t = 1; t <= ds.last_seen(i); ++t) {
      for (int j = 0; j < p_l; ++j) lvals[j] = ds.l(i, t, j);
      PolicyContext ctx{lvals.data(), p_l};
      const double eps = policy.is_stochastic() ? policy_epsilon(policy, i, t) : 0.0;
      const double zd = policy.apply(ds.z(i, t), t, ctx, eps);
      if (!policy.in_support(zd)) {
        std::ostringstream os;
        os << "apply_policy: output " << zd << " at (unit " << i << ", time " << t
           << ") lies outside the declared treatment support";
        fail(os.str());
      }
      out.z_shift_.at(i, t - 1) = zd;
    }
  }
  (void)tau;
  out.has_policy_ = true;
  return out;
}

// ---------------------------------------------------------------------------
// LongDataset
// ---------------------------------------------------------------------------

int LongDataset::row_of(int unit, int t) const {
  if (t < 1 || t > last_seen_[unit]) return -1;
  return start_[unit] + (t - 1);
}

LongDataset to_long(const WideDataset& ds, int k) {
  if (k < 0 || k > ds.tau()) fail("to_long: require 0 <= k <= tau");
  if (!ds.has_policy()) fail("to_long: dataset has no shifted treatment columns");

  LongDataset ld;
  ld.n_units_ = ds.n_units();
  ld.tau_ = ds.tau();
  ld.k_ = k;
  ld.outcome_ = ds.spec().outcome;
  ld.y_min_ = ds.outcome_min();
  ld.y_max_ = ds.outcome_max();
  ld.p_l_ = ds.spec().covariates_per_time();
  ld.p_b_ = static_cast<int>(ds.spec().baseline_cols.size());

  int total = 0;
  ld.start_.resize(ds.n_units());
  ld.last_seen_.resize(ds.n_units());
  for (int i = 0; i < ds.n_units(); ++i) {
    ld.start_[i] = total;
    ld.last_seen_[i] = ds.last_seen(i);
    total += ds.last_seen(i);
  }

  ld.unit_.resize(total);
  ld.time_.resize(total);
  ld.y_next_.resize(total);
  ld.n_cur_.resize(total);
  ld.n_next_.resize(total);
  ld.c_cur_.resize(total);
  ld.r_cur_.resize(total);
  ld.z_obs_.resize(total);
  ld.z_shift_.resize(total);
  ld.baseline_ = Matrix(total, ld.p_b_);
  ld.l_lags_ = Matrix(total, (k + 1) * ld.p_l_);
  ld.z_lags_ = Matrix(total, k);
  ld.c_lags_ = Matrix(total, k);
  ld.r_lags_ = Matrix(total, k);

  int row = 0;
  for (int i = 0; i < ds.n_units(); ++i) {
    for (int t = 1; t <= ds.last_seen(i); ++t, ++row) {
      ld.unit_[row] = i;
      ld.time_[row] = t;
      ld.y_next_[row] = ds.y_next(i, t);
      ld.n_cur_[row] = ds.at_risk(i, t);
      ld.n_next_[row] = ds.at_risk(i, t + 1);
      ld.c_cur_[row] = ds.c(i, t);
      ld.r_cur_[row] = ds.r(i, t);
      if (is_missing(ld.r_cur_[row])) ld.r_cur_[row] = 0.0;
      ld.z_obs_[row] = ds.z(i, t);
      ld.z_shift_[row] = ds.z_shifted(i, t);
      for (int j = 0; j < ld.p_b_; ++j) ld.baseline_.at(row, j) = ds.baseline(i, j);
      for (int lag = 0; lag <= k; ++lag) {
        const int s = t - lag;
        for (int j = 0; j < ld.p_l_; ++j) {
          ld.l_lags_.at(row, lag * ld.p_l_ + j) = s >= 1 ? ds.l(i, s, j) : 0.0;
        }
        if (lag >= 1) {
          ld.z_lags_.at(row, lag - 1) = s >= 1 ? ds.z(i, s) : 0.0;
          ld.c_lags_.at(row, lag - 1) = s >= 1 ? ds.c(i, s) : 0.0;
          ld.r_lags_.at(row, lag - 1) = s >= 1 ? ds.r(i, s) : 0.0;
        }
      }
    }
  }
  return ld;
}

Matrix LongDataset::predictors(bool shifted, bool include_time, bool include_treatment) const {
  const int rows = n_rows();
  const int p = (include_time ? 1 : 0) + (include_treatment ? 1 : 0) + p_b_ + (k_ + 1) * p_l_ + 3 * k_;
  Matrix x(rows, p);
  for (int row = 0; row < rows; ++row) {
    int j = 0;
    if (include_time) x.at(row, j++) = static_cast<double>(time_[row]);
    if (include_treatment) x.at(row, j++) = shifted ? z_shift_[row] : z_obs_[row];
    for (int b = 0; b < p_b_; ++b) x.at(row, j++) = baseline_.at(row, b);
    for (int c = 0; c < (k_ + 1) * p_l_; ++c) x.at(row, j++) = l_lags_.at(row, c);
    for (int lag = 0; lag < k_; ++lag) x.at(row, j++) = z_lags_.at(row, lag);
    for (int lag = 0; lag < k_; ++lag) x.at(row, j++) = c_lags_.at(row, lag);
    for (int lag = 0; lag < k_; ++lag) x.at(row, j++) = r_lags_.at(row, lag);
  }
  return x;
}

std::vector<std::string> LongDataset::predictor_names(bool include_time,
                                                      bool include_treatment) const {
  std::vector<std::string> names;
  if (include_time) names.push_back("t");
  if (include_treatment) names.push_back("z");
  for (int b = 0; b < p_b_; ++b) names.push_back("b" + std::to_string(b));
  for (int lag = 0; lag <= k_; ++lag) {
    for (int j = 0; j < p_l_; ++j) {
      names.push_back("l" + std::to_string(j) + "_lag" + std::to_string(lag));
    }
  }
  for (int lag = 1; lag <= k_; ++lag) names.push_back("z_lag" + std::to_string(lag));
  for (int lag = 1; lag <= k_; ++lag) names.push_back("c_lag" + std::to_string(lag));
  for (int lag = 1; lag <= k_; ++lag) names.push_back("r_lag" + std::to_string(lag));
  return names;
}

Table LongDataset::to_table() const {
  Table t;
  const int rows = n_rows();
  auto push = [&](const std::string& name, const std::function<double(int)>& get) {
    t.names.push_back(name);
    std::vector<double> col(rows);
    for (int r = 0; r < rows; ++r) col[r] = get(r);
    t.cols.push_back(std::move(col));
  };
  push("unit", [&](int r) { return static_cast<double>(unit_[r]); });
  push("t", [&](int r) { return static_cast<double>(time_[r]); });
  push("y_next", [&](int r) { return y_next_[r]; });
  push("n_cur", [&](int r) { return n_cur_[r]; });
  push("n_next", [&](int r) { return n_next_[r]; });
  push("c_cur", [&](int r) { return c_cur_[r]; });
  push("r_cur", [&](int r) { return r_cur_[r]; });
  push("z", [&](int r) { return z_obs_[r]; });
  push("z_shift", [&](int r) { return z_shift_[r]; });
  const auto names = predictor_names(false);
  const Matrix x = predictors(false, false);
  // Skip the treatment column already emitted.
  for (std::size_t j = 1; j < names.size(); ++j) {
    t.names.push_back(names[j]);
    std::vector<double> col(rows);
    for (int r = 0; r < rows; ++r) col[r] = x.at(r, j);
    t.cols.push_back(std::move(col));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Fold partition
// ---------------------------------------------------------------------------

FoldPartition fold_split(int n, int j_folds, std::uint64_t seed) {
  if (j_folds < 2) fail("fold_split: need at least 2 folds");
  if (j_folds > n) fail("fold_split: more folds than units");
  FoldPartition p;
  p.n_folds = j_folds;
  p.seed = seed;
  p.label.assign(n, 0);
  Rng rng(derive_seed(seed, 0x666f6c64ULL));
  const std::vector<int> order = rng.permutation(n);
  for (int idx = 0; idx < n; ++idx) p.label[order[idx]] = idx % j_folds;
  return p;
}

}  // namespace ecurve
