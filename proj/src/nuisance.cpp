#include "ecurve/nuisance.hpp"

#include <algorithm>
#include <cmath>

namespace ecurve {

namespace {

std::vector<int> all_rows(int n) {
  std::vector<int> rows(n);
  for (int i = 0; i < n; ++i) rows[i] = i;
  return rows;
}

// Degenerate binary targets get the constant itself, exactly: estimators
// downstream rely on g == 1 making the weights cancel without residue.
bool constant_target(const std::vector<double>& y, double* value) {
  if (y.empty()) return false;
  for (double v : y) {
    if (v != y[0]) return false;
  }
  *value = y[0];
  return true;
}

std::vector<double> fit_propensity(const LongDataset& long_data, const std::vector<double>& y,
                                   const FoldPartition& folds, const LearnerConfig& learner,
                                   int threads, const char* what) {
  const int n = long_data.n_rows();
  double cval = 0.0;
  if (constant_target(y, &cval)) {
    warn(std::string(what) + ": no variation in the target, using the constant");
    return std::vector<double>(n, clamp(cval, 1e-6, 1.0));
  }
  const Matrix x = long_data.predictors(false, true);
  RegressionTask task;
  task.x = &x;
  task.y = y;
  task.rows = all_rows(n);
  task.loss = Loss::log;
  task.groups.resize(n);
  for (int i = 0; i < n; ++i) task.groups[i] = long_data.unit(i);
  std::vector<int> unit_of_row = task.groups;
  const CrossFitModel cf = crossfit(task, unit_of_row, folds, learner, threads);
  std::vector<double> out = cf.predict(x, unit_of_row);
  for (double& v : out) v = clamp(v, 1e-6, 1.0);
  return out;
}

}  // namespace

std::vector<double> fit_censoring(const LongDataset& long_data, const FoldPartition& folds,
                                  const LearnerConfig& learner, int threads) {
  std::vector<double> y(long_data.n_rows());
  for (int i = 0; i < long_data.n_rows(); ++i) y[i] = long_data.c_cur(i);
  return fit_propensity(long_data, y, folds, learner, threads, "fit_censoring");
}

std::vector<double> fit_missingness(const LongDataset& long_data, const FoldPartition& folds,
                                    const LearnerConfig& learner, int threads) {
  std::vector<double> y(long_data.n_rows());
  for (int i = 0; i < long_data.n_rows(); ++i) y[i] = long_data.r_cur(i);
  return fit_propensity(long_data, y, folds, learner, threads, "fit_missingness");
}

DensityRatioEstimates estimate_density_ratio(const LongDataset& long_data, const Policy& policy,
                                             const FoldPartition& folds,
                                             const LearnerConfig& learner, RatioMethod method,
                                             int threads) {
  const int n = long_data.n_rows();
  DensityRatioEstimates out;
  out.r.resize(n);

  if (method == RatioMethod::categorical_analytic) {
    out.method = "categorical-analytic";
    if (policy.support.empty()) {
      throw std::runtime_error(
          "estimate_density_ratio: the analytic path needs an enumerated treatment support");
    }
    const auto& levels = policy.support;
    const int n_levels = static_cast<int>(levels.size());
    // g_Z is a model of the treatment given history: no z column.
    const Matrix x = long_data.predictors(false, true, false);
    std::vector<int> unit_of_row(n);
    for (int i = 0; i < n; ++i) unit_of_row[i] = long_data.unit(i);

    // One-vs-rest model per treatment level, then normalized.
    Matrix probs(n, n_levels);
    for (int q = 0; q < n_levels; ++q) {
      RegressionTask task;
      task.x = &x;
      task.rows = all_rows(n);
      task.loss = Loss::log;
      task.groups = unit_of_row;
      task.y.resize(n);
      for (int i = 0; i < n; ++i) {
        task.y[i] = std::fabs(long_data.z_obs(i) - levels[q]) < 1e-9 ? 1.0 : 0.0;
      }
      double cval = 0.0;
      std::vector<double> pred;
      if (constant_target(task.y, &cval)) {
        pred.assign(n, clamp(cval, 1e-6, 1.0 - 1e-6));
      } else {
        const CrossFitModel cf = crossfit(task, unit_of_row, folds, learner, threads);
        pred = cf.predict(x, unit_of_row);
      }
      for (int i = 0; i < n; ++i) probs.at(i, q) = pred[i];
    }

    const int p_l = long_data.covariates_per_time();
    std::vector<double> lvals(std::max(1, p_l));
    const double pi = policy.apply_prob;
    for (int i = 0; i < n; ++i) {
      const double z = long_data.z_obs(i);
      int z_idx = -1;
      for (int q = 0; q < n_levels; ++q) {
        if (std::fabs(levels[q] - z) < 1e-9) {
          z_idx = q;
          break;
        }
      }
      if (z_idx < 0) {
        throw std::runtime_error(
            "estimate_density_ratio: observed treatment outside the declared support");
      }
      for (int j = 0; j < p_l; ++j) lvals[j] = long_data.l_value(i, 0, j);
      PolicyContext ctx{lvals.data(), p_l};
      double g_d = 0.0;
      for (int q = 0; q < n_levels; ++q) {
        const double mapped = policy.apply(levels[q], long_data.time(i), ctx, 0.0);
        double mass = 0.0;
        if (std::fabs(mapped - z) < 1e-9) mass += pi;
        if (pi < 1.0 && std::fabs(levels[q] - z) < 1e-9) mass += 1.0 - pi;
        g_d += mass * probs.at(i, q);
      }
      const double g_obs = probs.at(i, z_idx);
      out.r[i] = g_d / g_obs;
    }
    return out;
  }

  // Classification trick: duplicate every row, label the shifted copy 1.
  out.method = "classification";
  const Matrix x_obs = long_data.predictors(false, true);
  const Matrix x_shift = long_data.predictors(true, true);
  Matrix stacked(2 * n, x_obs.cols());
  for (int i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < x_obs.cols(); ++j) {
      stacked.at(i, j) = x_obs.at(i, j);
      stacked.at(n + i, j) = x_shift.at(i, j);
    }
  }
  RegressionTask task;
  task.x = &stacked;
  task.rows = all_rows(2 * n);
  task.loss = Loss::log;
  task.y.assign(2 * n, 0.0);
  std::fill(task.y.begin() + n, task.y.end(), 1.0);
  task.groups.resize(2 * n);
  std::vector<int> unit_of_row(2 * n);
  for (int i = 0; i < n; ++i) {
    task.groups[i] = task.groups[n + i] = long_data.unit(i);
    unit_of_row[i] = unit_of_row[n + i] = long_data.unit(i);
  }
  const CrossFitModel cf = crossfit(task, unit_of_row, folds, learner, threads);
  std::vector<int> obs_rows(n);
  for (int i = 0; i < n; ++i) obs_rows[i] = i;
  const std::vector<double> p = cf.predict_rows(stacked, obs_rows, unit_of_row);
  int at_boundary = 0;
  for (int i = 0; i < n; ++i) {
    const double pi = p[i];
    if (pi <= 1e-6 + 1e-12 || pi >= 1.0 - 1e-6 - 1e-12) ++at_boundary;
    out.r[i] = pi / (1.0 - pi);
  }
  if (at_boundary > n / 10) {
    warn("estimate_density_ratio: classifier at the probability clip boundary on more than 10% "
         "of rows; overlap looks poor");
  }
  return out;
}

double weight_factor(double r_z, double c_ind, double g_c, double r_ind, double g_r,
                     bool include_r_factor, double cap) {
  if (g_c < 0.0 || g_r < 0.0 || r_z < 0.0) {
    throw std::runtime_error("weight_factor: negative input probability");
  }
  double w = r_z * (c_ind == 1.0 ? 1.0 / g_c : 0.0);
  if (include_r_factor) w *= r_ind == 1.0 ? 1.0 / g_r : 0.0;
  return std::min(w, cap);
}

WeightTable compute_weights(const LongDataset& long_data, const std::vector<double>& g_c,
                            const std::vector<double>& g_r, const std::vector<double>& r_z,
                            double cap) {
  const int n = long_data.n_rows();
  WeightTable w;
  w.cap = cap;
  w.base.resize(n);
  w.diag.resize(n);
  const int tau = long_data.tau();
  w.by_time.assign(tau, WeightTable::TimeSummary{});
  std::vector<int> counts(tau, 0);
  for (int i = 0; i < n; ++i) {
    if (g_c[i] < 0.0 || g_r[i] < 0.0 || r_z[i] < 0.0) {
      throw std::runtime_error("compute_weights: negative input probability");
    }
    const double c_ind = long_data.c_cur(i);
    const double r_ind = long_data.r_cur(i);
    const double raw_base = r_z[i] * (c_ind == 1.0 ? 1.0 / g_c[i] : 0.0);
    const double raw_diag = raw_base * (r_ind == 1.0 ? 1.0 / g_r[i] : 0.0);
    w.base[i] = std::min(raw_base, cap);
    w.diag[i] = std::min(raw_diag, cap);

    auto& ts = w.by_time[long_data.time(i) - 1];
    ts.time = long_data.time(i);
    ts.mean_base += w.base[i];
    ts.mean_diag += w.diag[i];
    ts.max_base = std::max(ts.max_base, w.base[i]);
    ts.max_diag = std::max(ts.max_diag, w.diag[i]);
    if (raw_base > cap) ts.truncated_base += 1;
    if (raw_diag > cap) ts.frac_trunc_diag += 1.0;
    if (raw_base > 0.0) ts.positive_base += 1;
    counts[long_data.time(i) - 1] += 1;
  }
  for (int t = 0; t < tau; ++t) {
    auto& ts = w.by_time[t];
    if (counts[t] > 0) {
      ts.mean_base /= counts[t];
      ts.mean_diag /= counts[t];
      ts.frac_trunc_base = static_cast<double>(ts.truncated_base) / counts[t];
      ts.frac_trunc_diag /= counts[t];
    }
  }
  return w;
}

}  // namespace ecurve
