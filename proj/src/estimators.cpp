#include "ecurve/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "ecurve/isotonic.hpp"

namespace ecurve {

namespace {

bool binary_outcome(const LongDataset& ld) {
  if (ld.outcome() == OutcomeKind::survival) return true;
  for (int i = 0; i < ld.n_rows(); ++i) {
    const double y = ld.y_next(i);
    if (!is_missing(y) && y != 0.0 && y != 1.0) return false;
  }
  return true;
}

Loss diagonal_loss(const LongDataset& ld) {
  return binary_outcome(ld) ? Loss::log : Loss::squared;
}

std::vector<int> units_of_rows(const LongDataset& ld) {
  std::vector<int> u(ld.n_rows());
  for (int i = 0; i < ld.n_rows(); ++i) u[i] = ld.unit(i);
  return u;
}

// Mean over units of a per-row column evaluated at the time-1 rows; every
// unit has one.
double mean_at_first_time(const LongDataset& ld, const std::vector<double>& col,
                          std::vector<double>* per_unit) {
  double s = 0.0;
  for (int i = 0; i < ld.n_units(); ++i) {
    const double v = col[ld.unit_start_row(i)];
    if (per_unit) (*per_unit)[i] = v;
    s += v;
  }
  return s / static_cast<double>(ld.n_units());
}

void track_range(const std::vector<double>& values, double* lo, double* hi) {
  for (double v : values) {
    if (std::isnan(v)) continue;
    *lo = std::min(*lo, v);
    *hi = std::max(*hi, v);
  }
}

}  // namespace

std::vector<double> compute_pseudo_outcomes(const LongDataset& ld, const WeightTable& wt,
                                            const RegressionSlices& slices, int lambda) {
  const int tau = ld.tau();
  std::vector<double> phi(ld.n_rows(), kMissing);
  for (int row = 0; row < ld.n_rows(); ++row) {
    const int u = ld.time(row);
    if (u + lambda > tau + 1) continue;
    const int target = u + lambda;  // outcome time t+1
    // Off the risk set the sequential regressions are identically zero (the
    // survival outcome is already determined), so every slice evaluation is
    // masked by the row's at-risk indicator.
    double acc = ld.n_cur(row) == 1.0 ? slices.shift[lambda - 1][row] : 0.0;
    double cumw = 1.0;
    for (int k = u; k <= target - 1; ++k) {
      const int row_k = row + (k - u);  // times are contiguous within a unit
      if (k > ld.last_seen(ld.unit(row))) break;
      cumw *= k == target - 1 ? wt.diag[row_k] : wt.base[row_k];
      if (cumw == 0.0) break;
      const int lam_k = target - k;
      const double m_obs = ld.n_cur(row_k) == 1.0 ? slices.obs[lam_k - 1][row_k] : 0.0;
      double next_val;
      if (k + 1 == target) {
        next_val = ld.n_next(row_k) == 1.0 ? ld.y_next(row_k) : 0.0;
      } else {
        const int row_k1 = row_k + 1;
        next_val = ld.n_next(row_k) == 1.0 ? slices.shift[lam_k - 2][row_k1] : 0.0;
      }
      acc += cumw * (next_val - m_obs);
    }
    phi[row] = acc;
  }
  return phi;
}

// ---------------------------------------------------------------------------
// Algorithm: standard sequential regression g-computation (per outcome)
// ---------------------------------------------------------------------------

CurveEstimate sequential_gcomp(const WideDataset& ds, const Policy& policy,
                               const LearnerConfig& learner, int threads) {
  Stopwatch watch;
  (void)threads;
  const WideDataset dsp = apply_policy(ds, policy);
  const LongDataset ld = to_long(dsp, dsp.tau());  // full history
  const int tau = ld.tau();
  const int n = ld.n_units();
  const Loss diag_loss = diagonal_loss(ld);

  const Matrix x_obs = ld.predictors(false, false);
  const Matrix x_shift = ld.predictors(true, false);

  CurveEstimate est;
  est.estimator = "sr";
  est.n_units = n;
  est.theta.assign(tau, 0.0);
  est.m_pred_min = std::numeric_limits<double>::infinity();
  est.m_pred_max = -std::numeric_limits<double>::infinity();

  std::vector<double> ytilde(ld.n_rows(), kMissing);
  for (int l = 1; l <= tau; ++l) {
    for (int s = l; s >= 1; --s) {
      RegressionTask task;
      task.x = &x_obs;
      task.loss = diag_loss;
      task.y.assign(ld.n_rows(), kMissing);
      for (int row = 0; row < ld.n_rows(); ++row) {
        if (ld.time(row) != s) continue;
        if (s == l) {
          if (ld.c_cur(row) == 1.0 && ld.n_cur(row) == 1.0 && ld.r_cur(row) == 1.0) {
            task.y[row] = ld.y_next(row);
            task.rows.push_back(row);
          }
        } else {
          if (ld.c_cur(row) == 1.0 && ld.n_cur(row) == 1.0) {
            const int next_row = ld.row_of(ld.unit(row), s + 1);
            task.y[row] = ld.n_next(row) == 1.0 ? ytilde[next_row] : 0.0;
            task.rows.push_back(row);
          }
        }
      }
      if (task.rows.empty()) {
        throw std::runtime_error("sequential_gcomp: empty regression subset at (l=" +
                                 std::to_string(l) + ", s=" + std::to_string(s) + ")");
      }
      const ModelPtr model = fit_learner(task, learner);
      est.outcome_fits += 1;
      std::vector<int> pred_rows;
      for (int row = 0; row < ld.n_rows(); ++row) {
        if (ld.time(row) == s) pred_rows.push_back(row);
      }
      const std::vector<double> preds = model->predict_rows(x_shift, pred_rows);
      for (std::size_t i = 0; i < pred_rows.size(); ++i) ytilde[pred_rows[i]] = preds[i];
      track_range(preds, &est.m_pred_min, &est.m_pred_max);
    }
    est.theta[l - 1] = mean_at_first_time(ld, ytilde, nullptr);
  }
  est.wall_ms = watch.elapsed_ms();
  return est;
}

// ---------------------------------------------------------------------------
// Algorithm: time-smoothed sequential regression g-computation
// ---------------------------------------------------------------------------

CurveEstimate smoothed_gcomp(const WideDataset& ds, const Policy& policy, int markov_order,
                             const LearnerConfig& learner, int threads) {
  Stopwatch watch;
  (void)threads;
  const int k = markov_order < 0 ? ds.spec().markov_order : markov_order;
  const WideDataset dsp = apply_policy(ds, policy);
  const LongDataset ld = to_long(dsp, k);
  const int tau = ld.tau();
  const Loss diag_loss = diagonal_loss(ld);

  const Matrix x_obs = ld.predictors(false, true);
  const Matrix x_shift = ld.predictors(true, true);

  CurveEstimate est;
  est.estimator = "smoothed-sr";
  est.n_units = ld.n_units();
  est.theta.assign(tau, 0.0);
  est.m_pred_min = std::numeric_limits<double>::infinity();
  est.m_pred_max = -std::numeric_limits<double>::infinity();

  // Diagonal: one pooled fit of Y_{t+1} on (t, Z_t, H_t).
  std::vector<double> ytilde(ld.n_rows(), kMissing);
  {
    RegressionTask task;
    task.x = &x_obs;
    task.loss = diag_loss;
    task.y.assign(ld.n_rows(), kMissing);
    for (int row = 0; row < ld.n_rows(); ++row) {
      if (ld.c_cur(row) == 1.0 && ld.n_cur(row) == 1.0 && ld.r_cur(row) == 1.0) {
        task.y[row] = ld.y_next(row);
        task.rows.push_back(row);
      }
    }
    if (task.rows.empty()) throw std::runtime_error("smoothed_gcomp: empty diagonal subset");
    const ModelPtr model = fit_learner(task, learner);
    est.outcome_fits += 1;
    const std::vector<double> preds = model->predict(x_shift);
    ytilde = preds;
    track_range(preds, &est.m_pred_min, &est.m_pred_max);
  }

  for (int l = 1; l <= tau; ++l) {
    est.theta[l - 1] = mean_at_first_time(ld, ytilde, nullptr);
    if (l == tau) break;
    const int lambda = l + 1;
    RegressionTask task;
    task.x = &x_obs;
    task.loss = diag_loss == Loss::log ? Loss::log : Loss::squared;
    task.y.assign(ld.n_rows(), kMissing);
    std::vector<int> pred_rows;
    for (int row = 0; row < ld.n_rows(); ++row) {
      if (ld.time(row) + lambda > tau + 1) continue;
      pred_rows.push_back(row);
      if (ld.c_cur(row) == 1.0 && ld.n_cur(row) == 1.0) {
        task.y[row] = ld.n_next(row) == 1.0 ? ytilde[row + 1] : 0.0;
        task.rows.push_back(row);
      }
    }
    if (task.rows.empty()) {
      throw std::runtime_error("smoothed_gcomp: empty regression subset at lag " +
                               std::to_string(lambda));
    }
    const ModelPtr model = fit_learner(task, learner);
    est.outcome_fits += 1;
    const std::vector<double> preds = model->predict_rows(x_shift, pred_rows);
    std::fill(ytilde.begin(), ytilde.end(), kMissing);
    for (std::size_t i = 0; i < pred_rows.size(); ++i) ytilde[pred_rows[i]] = preds[i];
    track_range(preds, &est.m_pred_min, &est.m_pred_max);
  }
  est.wall_ms = watch.elapsed_ms();
  return est;
}

// ---------------------------------------------------------------------------
// Algorithm: pooled sequentially doubly robust estimator with time-smoothing
// ---------------------------------------------------------------------------

CurveEstimate smoothed_sdr(const WideDataset& ds, const Policy& policy, const SdrOptions& opt,
                           const NuisanceOverrides* oracle) {
  Stopwatch watch;
  const int k = opt.markov_order < 0 ? ds.spec().markov_order : opt.markov_order;
  const WideDataset dsp = apply_policy(ds, policy);
  const LongDataset ld = to_long(dsp, k);
  const int tau = ld.tau();
  const int n = ld.n_units();
  const int n_rows = ld.n_rows();
  const Loss diag_loss = diagonal_loss(ld);
  const bool is_binary = binary_outcome(ld);

  if (opt.folds < 2) throw std::invalid_argument("smoothed_sdr: need J >= 2 folds");
  const FoldPartition folds = fold_split(n, opt.folds, derive_seed(opt.seed, 0x736472ULL));
  const std::vector<int> unit_of_row = units_of_rows(ld);

  const Matrix x_obs = ld.predictors(false, true);
  const Matrix x_shift = ld.predictors(true, true);

  CurveEstimate est;
  est.estimator = opt.calibrate ? "sdr" : "sdr-unconstrained";
  est.n_units = n;
  est.theta.assign(tau, 0.0);
  est.influence = Matrix(n, tau);
  est.has_influence = true;
  est.m_pred_min = std::numeric_limits<double>::infinity();
  est.m_pred_max = -std::numeric_limits<double>::infinity();

  // Nuisances for the reweighting function.
  std::vector<double> g_c, g_r, r_z;
  if (oracle && oracle->g_c) {
    g_c = *oracle->g_c;
  } else {
    g_c = fit_censoring(ld, folds, opt.learner, opt.threads);
    est.propensity_fits += 1;
  }
  if (oracle && oracle->g_r) {
    g_r = *oracle->g_r;
  } else {
    g_r = fit_missingness(ld, folds, opt.learner, opt.threads);
    est.propensity_fits += 1;
  }
  if (oracle && oracle->r_z) {
    r_z = *oracle->r_z;
    est.ratio_method = "oracle";
  } else {
    DensityRatioEstimates dr =
        estimate_density_ratio(ld, policy, folds, opt.learner, opt.ratio, opt.threads);
    r_z = std::move(dr.r);
    est.ratio_method = dr.method;
    est.propensity_fits += 1;
  }
  est.weights = compute_weights(ld, g_c, g_r, r_z, opt.truncation);
  for (const auto& ts : est.weights.by_time) {
    if (ts.positive_base > 0 && ts.truncated_base == ts.positive_base) {
      throw std::runtime_error(
          "smoothed_sdr: overlap failure at time " + std::to_string(ts.time) +
          ": every positive weight hit the truncation bound c=" + std::to_string(opt.truncation));
    }
  }

  RegressionSlices slices;
  slices.obs.assign(tau, std::vector<double>(n_rows, kMissing));
  slices.shift.assign(tau, std::vector<double>(n_rows, kMissing));

  // Diagonal regression m_{t+1,t}: Y_{t+1} ~ (t, Z_t, H_t) on {C=N=R=1}.
  if (oracle && oracle->m) {
    for (int row = 0; row < n_rows; ++row) {
      slices.obs[0][row] = oracle->m(1, row, false);
      slices.shift[0][row] = oracle->m(1, row, true);
    }
  } else {
    RegressionTask task;
    task.x = &x_obs;
    task.loss = diag_loss;
    task.groups = unit_of_row;
    task.y.assign(n_rows, kMissing);
    for (int row = 0; row < n_rows; ++row) {
      if (ld.c_cur(row) == 1.0 && ld.n_cur(row) == 1.0 && ld.r_cur(row) == 1.0) {
        task.y[row] = ld.y_next(row);
        task.rows.push_back(row);
      }
    }
    if (task.rows.empty()) throw std::runtime_error("smoothed_sdr: empty diagonal subset");
    const CrossFitModel cf = crossfit(task, unit_of_row, folds, opt.learner, opt.threads);
    est.outcome_fits += 1;
    slices.obs[0] = cf.predict(x_obs, unit_of_row);
    slices.shift[0] = cf.predict(x_shift, unit_of_row);
  }
  track_range(slices.obs[0], &est.m_pred_min, &est.m_pred_max);
  track_range(slices.shift[0], &est.m_pred_min, &est.m_pred_max);

  std::vector<double> phi = compute_pseudo_outcomes(ld, est.weights, slices, 1);

  for (int l = 1; l <= tau; ++l) {
    std::vector<double> per_unit(n);
    est.theta[l - 1] = mean_at_first_time(ld, phi, &per_unit);
    for (int i = 0; i < n; ++i) est.influence.at(i, l - 1) = per_unit[i];
    if (l == tau) break;

    const int lambda = l + 1;
    std::vector<int> pred_rows;
    RegressionTask task;
    task.x = &x_obs;
    task.loss = Loss::squared;  // pseudo-outcomes are unbounded
    task.groups = unit_of_row;
    task.y.assign(n_rows, kMissing);
    for (int row = 0; row < n_rows; ++row) {
      if (ld.time(row) + lambda > tau + 1) continue;
      pred_rows.push_back(row);
      if (ld.c_cur(row) == 1.0 && ld.n_cur(row) == 1.0) {
        task.y[row] = ld.n_next(row) == 1.0 ? phi[row + 1] : 0.0;
        task.rows.push_back(row);
      }
    }
    if (task.rows.empty()) {
      throw std::runtime_error("smoothed_sdr: empty regression subset at lag " +
                               std::to_string(lambda));
    }

    if (oracle && oracle->m) {
      for (int row : pred_rows) {
        slices.obs[lambda - 1][row] = oracle->m(lambda, row, false);
        slices.shift[lambda - 1][row] = oracle->m(lambda, row, true);
      }
    } else {
      const CrossFitModel cf = crossfit(task, unit_of_row, folds, opt.learner, opt.threads);
      est.outcome_fits += 1;
      std::vector<double> pred_obs = cf.predict_rows(x_obs, pred_rows, unit_of_row);
      std::vector<double> pred_shift = cf.predict_rows(x_shift, pred_rows, unit_of_row);
      if (opt.calibrate) {
        // Isotonic constraint: project onto monotone transformations of the
        // preliminary fit, range-restricted to the outcome support. The fit
        // pools the out-of-fold predictions at the observed treatments
        // against the regression targets.
        const double lo = is_binary ? 0.0 : ld.outcome_min();
        const double hi = is_binary ? 1.0 : ld.outcome_max();
        std::vector<int> pos_in_pred(n_rows, -1);
        for (std::size_t i = 0; i < pred_rows.size(); ++i) pos_in_pred[pred_rows[i]] = static_cast<int>(i);
        std::vector<double> prelim(task.rows.size()), targets(task.rows.size());
        for (std::size_t i = 0; i < task.rows.size(); ++i) {
          prelim[i] = pred_obs[pos_in_pred[task.rows[i]]];
          targets[i] = task.y[task.rows[i]];
        }
        const StepFunction g = calibrate(prelim, targets, lo, hi);
        for (double& v : pred_obs) v = g.evaluate(v);
        for (double& v : pred_shift) v = g.evaluate(v);
      }
      for (std::size_t i = 0; i < pred_rows.size(); ++i) {
        slices.obs[lambda - 1][pred_rows[i]] = pred_obs[i];
        slices.shift[lambda - 1][pred_rows[i]] = pred_shift[i];
      }
      track_range(pred_obs, &est.m_pred_min, &est.m_pred_max);
      track_range(pred_shift, &est.m_pred_min, &est.m_pred_max);
    }
    phi = compute_pseudo_outcomes(ld, est.weights, slices, lambda);
  }

  est.wall_ms = watch.elapsed_ms();
  return est;
}

// ---------------------------------------------------------------------------
// Benchmark: single-outcome SDR applied once per target time
// ---------------------------------------------------------------------------

CurveEstimate benchmark_sdr(const WideDataset& ds, const Policy& policy, const SdrOptions& opt) {
  Stopwatch watch;
  const WideDataset dsp = apply_policy(ds, policy);
  const LongDataset ld = to_long(dsp, dsp.tau());  // full history, no pooling
  const int tau = ld.tau();
  const int n = ld.n_units();
  const int n_rows = ld.n_rows();
  const Loss diag_loss = diagonal_loss(ld);

  if (opt.folds < 2) throw std::invalid_argument("benchmark_sdr: need J >= 2 folds");
  const FoldPartition folds = fold_split(n, opt.folds, derive_seed(opt.seed, 0x736472ULL));
  const std::vector<int> unit_of_row = units_of_rows(ld);

  // Per-time regressions never see the pooled time column.
  const Matrix x_obs = ld.predictors(false, false);
  const Matrix x_shift = ld.predictors(true, false);

  CurveEstimate est;
  est.estimator = "benchmark-sdr";
  est.n_units = n;
  est.theta.assign(tau, 0.0);
  est.influence = Matrix(n, tau);
  est.has_influence = true;
  est.m_pred_min = std::numeric_limits<double>::infinity();
  est.m_pred_max = -std::numeric_limits<double>::infinity();
  est.ratio_method = "classification";

  std::vector<std::vector<int>> rows_at_time(tau + 1);
  for (int row = 0; row < n_rows; ++row) rows_at_time[ld.time(row)].push_back(row);

  auto fit_binary_at_time = [&](const std::vector<double>& target, int s) {
    std::vector<double> out(n_rows, 1.0);
    bool constant = true;
    const auto& rows = rows_at_time[s];
    if (rows.empty()) {
      throw std::runtime_error("benchmark_sdr: no observed rows at time " + std::to_string(s));
    }
    for (int row : rows) {
      if (target[row] != target[rows[0]]) {
        constant = false;
        break;
      }
    }
    if (constant) {
      for (int row : rows) out[row] = clamp(target[rows[0]], 1e-6, 1.0);
      return out;
    }
    RegressionTask task;
    task.x = &x_obs;
    task.loss = Loss::log;
    task.groups = unit_of_row;
    task.y = target;
    task.rows = rows;
    const CrossFitModel cf = crossfit(task, unit_of_row, folds, opt.learner, opt.threads);
    const std::vector<double> pred = cf.predict_rows(x_obs, rows, unit_of_row);
    for (std::size_t i = 0; i < rows.size(); ++i) out[rows[i]] = clamp(pred[i], 1e-6, 1.0);
    return out;
  };

  for (int l = 1; l <= tau; ++l) {
    // Reestimate every nuisance for this target, as the naive benchmark does.
    std::vector<double> g_c(n_rows, 1.0), g_r(n_rows, 1.0), r_z(n_rows, 0.0);
    std::vector<double> c_target(n_rows, 0.0), r_target(n_rows, 0.0);
    for (int row = 0; row < n_rows; ++row) {
      c_target[row] = ld.c_cur(row);
      r_target[row] = ld.r_cur(row);
    }
    for (int s = 1; s <= l; ++s) {
      {
        const auto v = fit_binary_at_time(c_target, s);
        for (int row : rows_at_time[s]) g_c[row] = v[row];
        est.propensity_fits += 1;
      }
      // Density ratio at time s via the classification trick on that time's rows.
      const auto& rows = rows_at_time[s];
      Matrix stacked(2 * rows.size(), x_obs.cols());
      std::vector<int> stacked_units(2 * rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < x_obs.cols(); ++j) {
          stacked.at(i, j) = x_obs.at(rows[i], j);
          stacked.at(rows.size() + i, j) = x_shift.at(rows[i], j);
        }
        stacked_units[i] = stacked_units[rows.size() + i] = unit_of_row[rows[i]];
      }
      RegressionTask task;
      task.x = &stacked;
      task.loss = Loss::log;
      task.groups = stacked_units;
      task.y.assign(2 * rows.size(), 0.0);
      std::fill(task.y.begin() + rows.size(), task.y.end(), 1.0);
      task.rows.resize(2 * rows.size());
      for (std::size_t i = 0; i < task.rows.size(); ++i) task.rows[i] = static_cast<int>(i);
      const CrossFitModel cf = crossfit(task, stacked_units, folds, opt.learner, opt.threads);
      std::vector<int> first_half(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) first_half[i] = static_cast<int>(i);
      const std::vector<double> p = cf.predict_rows(stacked, first_half, stacked_units);
      for (std::size_t i = 0; i < rows.size(); ++i) r_z[rows[i]] = p[i] / (1.0 - p[i]);
      est.propensity_fits += 1;
    }
    {
      auto v = fit_binary_at_time(r_target, l);
      for (int row : rows_at_time[l]) g_r[row] = v[row];
      est.propensity_fits += 1;
    }
    const WeightTable weights = compute_weights(ld, g_c, g_r, r_z, opt.truncation);

    RegressionSlices slices;
    slices.obs.assign(tau, std::vector<double>(n_rows, kMissing));
    slices.shift.assign(tau, std::vector<double>(n_rows, kMissing));

    std::vector<double> phi;
    for (int lambda = 1; lambda <= l; ++lambda) {
      const int s = l + 1 - lambda;  // regression time for this slice
      RegressionTask task;
      task.x = &x_obs;
      task.loss = lambda == 1 ? diag_loss : Loss::squared;
      task.groups = unit_of_row;
      task.y.assign(n_rows, kMissing);
      for (int row : rows_at_time[s]) {
        if (lambda == 1) {
          if (ld.c_cur(row) == 1.0 && ld.n_cur(row) == 1.0 && ld.r_cur(row) == 1.0) {
            task.y[row] = ld.y_next(row);
            task.rows.push_back(row);
          }
        } else {
          if (ld.c_cur(row) == 1.0 && ld.n_cur(row) == 1.0) {
            task.y[row] = ld.n_next(row) == 1.0 ? phi[row + 1] : 0.0;
            task.rows.push_back(row);
          }
        }
      }
      if (task.rows.empty()) {
        throw std::runtime_error("benchmark_sdr: empty regression subset at (l=" +
                                 std::to_string(l) + ", s=" + std::to_string(s) + ")");
      }
      const CrossFitModel cf = crossfit(task, unit_of_row, folds, opt.learner, opt.threads);
      est.outcome_fits += 1;
      const std::vector<double> pred_obs = cf.predict_rows(x_obs, rows_at_time[s], unit_of_row);
      const std::vector<double> pred_shift = cf.predict_rows(x_shift, rows_at_time[s], unit_of_row);
      for (std::size_t i = 0; i < rows_at_time[s].size(); ++i) {
        slices.obs[lambda - 1][rows_at_time[s][i]] = pred_obs[i];
        slices.shift[lambda - 1][rows_at_time[s][i]] = pred_shift[i];
      }
      track_range(pred_obs, &est.m_pred_min, &est.m_pred_max);
      track_range(pred_shift, &est.m_pred_min, &est.m_pred_max);
      phi = compute_pseudo_outcomes(ld, weights, slices, lambda);
    }
    std::vector<double> per_unit(n);
    est.theta[l - 1] = mean_at_first_time(ld, phi, &per_unit);
    for (int i = 0; i < n; ++i) est.influence.at(i, l - 1) = per_unit[i];
    if (l == 1) est.weights = weights;
  }

  est.wall_ms = watch.elapsed_ms();
  return est;
}

}  // namespace ecurve
