#include "ecurve/inference.hpp"

#include <algorithm>
#include <cmath>

namespace ecurve {

namespace {

std::vector<double> column_sigmas(const Matrix& influence) {
  const std::size_t n = influence.rows();
  const std::size_t tau = influence.cols();
  std::vector<double> sigma(tau, 0.0);
  for (std::size_t t = 0; t < tau; ++t) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += influence.at(i, t);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = influence.at(i, t) - mean;
      ss += d * d;
    }
    sigma[t] = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  }
  return sigma;
}

}  // namespace

InferenceResult pointwise_ci(const Matrix& influence, const std::vector<double>& theta,
                             double alpha) {
  if (influence.rows() < 2) throw std::invalid_argument("pointwise_ci: need n >= 2");
  if (influence.cols() != theta.size()) {
    throw std::invalid_argument("pointwise_ci: dimension mismatch");
  }
  InferenceResult res;
  res.alpha = alpha;
  res.sigma = column_sigmas(influence);
  const double z = normal_quantile(1.0 - alpha / 2.0);
  const double sqrt_n = std::sqrt(static_cast<double>(influence.rows()));
  res.pw_lo.resize(theta.size());
  res.pw_hi.resize(theta.size());
  for (std::size_t t = 0; t < theta.size(); ++t) {
    if (res.sigma[t] == 0.0) {
      warn("pointwise_ci: zero influence variance at time " + std::to_string(t + 2) +
           ", interval degenerates to the point estimate");
    }
    const double hw = z * res.sigma[t] / sqrt_n;
    res.pw_lo[t] = theta[t] - hw;
    res.pw_hi[t] = theta[t] + hw;
  }
  return res;
}

Matrix covariance(const Matrix& influence) {
  const std::size_t n = influence.rows();
  const std::size_t tau = influence.cols();
  if (n < 2) throw std::invalid_argument("covariance: need n >= 2");
  std::vector<double> mean(tau, 0.0);
  for (std::size_t t = 0; t < tau; ++t) {
    for (std::size_t i = 0; i < n; ++i) mean[t] += influence.at(i, t);
    mean[t] /= static_cast<double>(n);
  }
  Matrix cov(tau, tau);
  for (std::size_t a = 0; a < tau; ++a) {
    for (std::size_t b = a; b < tau; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        s += (influence.at(i, a) - mean[a]) * (influence.at(i, b) - mean[b]);
      }
      const double v = s / static_cast<double>(n - 1);
      cov.at(a, b) = v;
      cov.at(b, a) = v;
    }
  }
  return cov;
}

InferenceResult multiplier_bootstrap(const Matrix& influence, const std::vector<double>& theta,
                                     const InferenceOptions& opt) {
  if (opt.bootstrap_draws < 100) {
    throw std::invalid_argument("multiplier_bootstrap: need at least 100 draws");
  }
  InferenceResult res = pointwise_ci(influence, theta, opt.alpha);
  res.draws = opt.bootstrap_draws;
  res.multiplier = opt.multiplier == MultiplierKind::rademacher ? "rademacher" : "gaussian";

  const std::size_t n = influence.rows();
  const std::size_t tau = influence.cols();
  std::vector<std::size_t> live;
  for (std::size_t t = 0; t < tau; ++t) {
    if (res.sigma[t] > 0.0) {
      live.push_back(t);
    } else {
      warn("multiplier_bootstrap: time " + std::to_string(t + 2) +
           " has zero variance and is excluded from the max");
    }
  }

  const double z = normal_quantile(1.0 - opt.alpha / 2.0);
  res.band_lo.resize(tau);
  res.band_hi.resize(tau);

  if (live.empty()) {
    warn("multiplier_bootstrap: every coordinate is degenerate; bands collapse to the points");
    res.band_lo.assign(theta.begin(), theta.end());
    res.band_hi.assign(theta.begin(), theta.end());
    return res;
  }

  // Centered, standardized influence columns.
  Matrix standardized(n, live.size());
  for (std::size_t j = 0; j < live.size(); ++j) {
    const std::size_t t = live[j];
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += influence.at(i, t);
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      standardized.at(i, j) = (influence.at(i, t) - mean) / res.sigma[t];
    }
  }

  std::vector<double> max_stat(opt.bootstrap_draws);
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  parallel_for(static_cast<std::size_t>(opt.bootstrap_draws), opt.threads, [&](std::size_t b) {
    Rng rng(derive_seed(opt.seed, 0x6d627374ULL, b));
    std::vector<double> acc(live.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double xi = opt.multiplier == MultiplierKind::rademacher
                            ? (rng.uniform() < 0.5 ? -1.0 : 1.0)
                            : rng.normal();
      for (std::size_t j = 0; j < live.size(); ++j) acc[j] += xi * standardized.at(i, j);
    }
    double m = 0.0;
    for (std::size_t j = 0; j < live.size(); ++j) m = std::max(m, std::fabs(acc[j] * inv_sqrt_n));
    max_stat[b] = m;
  });

  res.c_alpha = quantile_type7(max_stat, 1.0 - opt.alpha);
  // The uniform band at level alpha must contain the pointwise interval, so
  // the applied critical value never drops below the normal quantile.
  res.c_alpha_used = std::max(res.c_alpha, z);
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  for (std::size_t t = 0; t < tau; ++t) {
    const double hw = res.c_alpha_used * res.sigma[t] / sqrt_n;
    res.band_lo[t] = theta[t] - hw;
    res.band_hi[t] = theta[t] + hw;
  }
  return res;
}

InferenceResult infer(const CurveEstimate& estimate, const InferenceOptions& opt) {
  if (!estimate.has_influence) {
    throw std::runtime_error("infer: estimator '" + estimate.estimator +
                             "' carries no influence values");
  }
  InferenceResult res = multiplier_bootstrap(estimate.influence, estimate.theta, opt);
  if (opt.with_covariance) {
    res.covariance = covariance(estimate.influence);
    res.has_covariance = true;
  }
  return res;
}

CurveEstimate contrast(const CurveEstimate& a, const CurveEstimate& b) {
  if (!a.has_influence || !b.has_influence) {
    throw std::runtime_error("contrast: both estimates need influence values");
  }
  if (a.n_units != b.n_units || a.theta.size() != b.theta.size()) {
    throw std::runtime_error("contrast: estimates cover different units or horizons");
  }
  CurveEstimate out;
  out.estimator = "contrast(" + a.estimator + "-" + b.estimator + ")";
  out.n_units = a.n_units;
  out.theta.resize(a.theta.size());
  for (std::size_t t = 0; t < a.theta.size(); ++t) out.theta[t] = a.theta[t] - b.theta[t];
  out.influence = Matrix(a.influence.rows(), a.influence.cols());
  for (std::size_t i = 0; i < a.influence.rows(); ++i) {
    for (std::size_t t = 0; t < a.influence.cols(); ++t) {
      out.influence.at(i, t) = a.influence.at(i, t) - b.influence.at(i, t);
    }
  }
  out.has_influence = true;
  out.outcome_fits = a.outcome_fits + b.outcome_fits;
  out.propensity_fits = a.propensity_fits + b.propensity_fits;
  out.wall_ms = a.wall_ms + b.wall_ms;
  return out;
}

}  // namespace ecurve
