#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ecurve/estimators.hpp"
#include "ecurve/simulation.hpp"
#include "test_support.hpp"

using namespace ecurve;
using namespace ecurve::testing;

namespace {

std::vector<double> column_means_of_y(const WideDataset& ds) {
  std::vector<double> means(ds.tau(), 0.0);
  for (int t = 1; t <= ds.tau(); ++t) {
    double s = 0.0;
    for (int i = 0; i < ds.n_units(); ++i) s += ds.y_next(i, t);
    means[t - 1] = s / ds.n_units();
  }
  return means;
}

Policy identity_with_support(int z_max) {
  Policy p = Policy::identity();
  for (int z = 0; z <= z_max; ++z) p.support.push_back(z);
  return p;
}

}  // namespace

TEST_CASE("sequential_gcomp: intercept-only learner collapses to per-time outcome means") {
  const NodeSpec spec = simple_spec(4, 1);
  const Table t = random_full_table(spec, 60, 31);
  const WideDataset ds = validate_wide(t, spec);
  const CurveEstimate est =
      sequential_gcomp(ds, Policy::identity(), LearnerConfig::intercept());
  const auto means = column_means_of_y(ds);
  for (int tt = 0; tt < 4; ++tt) CHECK(est.theta[tt] == doctest::Approx(means[tt]).epsilon(1e-10));
  CHECK(est.outcome_fits == 10);  // tau(tau-1)/2 + tau
}

TEST_CASE("sequential_gcomp: tau = 1 reduces to one regression") {
  const NodeSpec spec = simple_spec(1, 0);
  const Table t = random_full_table(spec, 200, 32);
  const WideDataset ds = validate_wide(t, spec);
  const CurveEstimate est = sequential_gcomp(ds, Policy::identity(), LearnerConfig::glm());
  CHECK(est.outcome_fits == 1);

  // theta(2) is the average prediction at (Z^d_1, H_1); under the identity
  // policy with a GLM that is the average fitted value = mean of Y_2.
  const auto means = column_means_of_y(ds);
  CHECK(est.theta[0] == doctest::Approx(means[0]).epsilon(1e-8));
}

TEST_CASE("smoothed_gcomp: tau = 1 agrees with the standard algorithm") {
  const NodeSpec spec = simple_spec(1, 0);
  const Table t = random_full_table(spec, 150, 33, 3);
  const WideDataset ds = validate_wide(t, spec);
  const Policy shift = Policy::shift(-1.0, 0.0, 3.0);
  const CurveEstimate a = sequential_gcomp(ds, shift, LearnerConfig::glm());
  const CurveEstimate b = smoothed_gcomp(ds, shift, 0, LearnerConfig::glm());
  CHECK(a.theta[0] == doctest::Approx(b.theta[0]).epsilon(1e-5));
}

TEST_CASE("smoothed_gcomp: fit-count telemetry is tau pooled fits") {
  const NodeSpec spec = simple_spec(4, 1);
  const Table t = random_full_table(spec, 50, 34);
  const WideDataset ds = validate_wide(t, spec);
  const CurveEstimate est = smoothed_gcomp(ds, Policy::identity(), 1, LearnerConfig::intercept());
  CHECK(est.outcome_fits == 4);
}

TEST_CASE("saturated learners make the pooled and standard recursions agree exactly") {
  // Binary covariate, binary treatment, identity policy, no missingness: both
  // algorithms compute nested conditional means on the same discrete cells.
  const NodeSpec spec = simple_spec(3, 3);
  const Table t = random_full_table(spec, 400, 35, 1);
  const WideDataset ds = validate_wide(t, spec);
  const CurveEstimate a = sequential_gcomp(ds, Policy::identity(), LearnerConfig::saturated());
  const CurveEstimate b = smoothed_gcomp(ds, Policy::identity(), 3, LearnerConfig::saturated());
  for (int tt = 0; tt < 3; ++tt) CHECK(a.theta[tt] == doctest::Approx(b.theta[tt]).epsilon(1e-6));

  // Independent oracle: exhaustive conditional means over the discrete
  // support, iterated backwards. Under the identity policy this is just the
  // outcome mean, which both recursions must reproduce exactly.
  const auto means = column_means_of_y(ds);
  for (int tt = 0; tt < 3; ++tt) CHECK(a.theta[tt] == doctest::Approx(means[tt]).epsilon(1e-9));
}

TEST_CASE("compute_pseudo_outcomes: telescoping and degenerate weights") {
  const NodeSpec spec = simple_spec(3, 1);
  const Table t = random_full_table(spec, 25, 36, 2);
  const WideDataset ds = apply_policy(validate_wide(t, spec), Policy::identity());
  const LongDataset ld = to_long(ds, 1);

  // Random regression slices; under the identity policy the observed and
  // shifted prediction columns coincide.
  Rng rng(905);
  RegressionSlices slices;
  slices.obs.assign(3, std::vector<double>(ld.n_rows(), kMissing));
  slices.shift.assign(3, std::vector<double>(ld.n_rows(), kMissing));
  for (int lambda = 1; lambda <= 3; ++lambda) {
    for (int row = 0; row < ld.n_rows(); ++row) {
      if (ld.time(row) + lambda > 4) continue;
      const double v = rng.uniform();
      slices.obs[lambda - 1][row] = v;
      slices.shift[lambda - 1][row] = v;
    }
  }

  SUBCASE("unit weights telescope to the realized outcome") {
    WeightTable w;
    w.cap = 50.0;
    w.base.assign(ld.n_rows(), 1.0);
    w.diag.assign(ld.n_rows(), 1.0);
    for (int lambda = 1; lambda <= 3; ++lambda) {
      const auto phi = compute_pseudo_outcomes(ld, w, slices, lambda);
      for (int row = 0; row < ld.n_rows(); ++row) {
        if (ld.time(row) + lambda > 4) continue;
        const int yrow = ld.row_of(ld.unit(row), ld.time(row) + lambda - 1);
        CHECK(phi[row] == doctest::Approx(ld.y_next(yrow)).epsilon(1e-12));
      }
    }
  }
  SUBCASE("zero weights leave only the shifted prediction") {
    WeightTable w;
    w.cap = 50.0;
    w.base.assign(ld.n_rows(), 0.0);
    w.diag.assign(ld.n_rows(), 0.0);
    for (int lambda = 1; lambda <= 3; ++lambda) {
      const auto phi = compute_pseudo_outcomes(ld, w, slices, lambda);
      for (int row = 0; row < ld.n_rows(); ++row) {
        if (ld.time(row) + lambda > 4) continue;
        CHECK(phi[row] == slices.shift[lambda - 1][row]);
      }
    }
  }
}

TEST_CASE("compute_pseudo_outcomes: matches an independent symbolic expansion at tau = 2") {
  const NodeSpec spec = simple_spec(2, 1);
  Table t = random_full_table(spec, 1, 37, 2);
  set_cell(t, "y3", 0, 0.8);
  const WideDataset ds = apply_policy(validate_wide(t, spec), Policy::shift(-1.0, 0.0, 2.0));
  const LongDataset ld = to_long(ds, 1);
  REQUIRE(ld.n_rows() == 2);

  RegressionSlices slices;
  slices.obs.assign(2, std::vector<double>(2, kMissing));
  slices.shift.assign(2, std::vector<double>(2, kMissing));
  // m_{3,2} at row 1 (time 2) and m_{3,1} at row 0 (time 1); hand scalars.
  const double mo32 = 0.37, ms32 = 0.52, mo31 = 0.21, ms31 = 0.64;
  slices.obs[0] = {kMissing, mo32};
  slices.shift[0] = {kMissing, ms32};
  slices.obs[1] = {mo31, kMissing};
  slices.shift[1] = {ms31, kMissing};

  WeightTable w;
  w.cap = 50.0;
  w.base = {1.3, 0.9};
  w.diag = {0.7, 0.6};

  const auto phi = compute_pseudo_outcomes(ld, w, slices, 2);
  // phi_{3,1} = w_{2,1} [m_{3,2}(z^d_2) - m_{3,1}(z_1)]
  //           + w_{2,1} w_{2,2} [y_3 - m_{3,2}(z_2)] + m_{3,1}(z^d_1),
  // with w_{2,1} the base factor at time 1 and w_{2,2} the diagonal factor.
  const double expected = 1.3 * (ms32 - mo31) + 1.3 * 0.6 * (0.8 - mo32) + ms31;
  CHECK(phi[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("smoothed_sdr: telescoping identity on fully observed data") {
  const NodeSpec spec = simple_spec(4, 1);
  const Table t = random_full_table(spec, 50, 38, 2);
  const WideDataset ds = validate_wide(t, spec);
  SdrOptions opt;
  opt.folds = 5;
  opt.learner = LearnerConfig::glm();
  opt.ratio = RatioMethod::categorical_analytic;
  opt.seed = 2;
  const CurveEstimate est = smoothed_sdr(ds, identity_with_support(2), opt);
  const auto means = column_means_of_y(ds);
  for (int tt = 0; tt < 4; ++tt) {
    CHECK(std::fabs(est.theta[tt] - means[tt]) < 1e-10);
  }
  CHECK(est.outcome_fits == 4);
  CHECK(est.ratio_method == "categorical-analytic");
}

TEST_CASE("smoothed_sdr: influence values average exactly to the estimate") {
  const NodeSpec spec = simple_spec(3, 1);
  const Table t = random_full_table(spec, 40, 39, 2);
  const WideDataset ds = validate_wide(t, spec);
  SdrOptions opt;
  opt.folds = 2;
  opt.learner = LearnerConfig::glm();
  opt.seed = 3;
  const CurveEstimate est = smoothed_sdr(ds, identity_with_support(2), opt);
  REQUIRE(est.has_influence);
  for (int tt = 0; tt < 3; ++tt) {
    double s = 0.0;
    for (int i = 0; i < est.n_units; ++i) s += est.influence.at(i, tt);
    CHECK(est.theta[tt] == s / est.n_units);
  }
}

TEST_CASE("smoothed_sdr: masked outcome cells never reach a regression") {
  const NodeSpec spec = simple_spec(3, 1);
  Table clean = random_full_table(spec, 60, 40, 2);
  Rng rng(906);
  for (int i = 0; i < 60; ++i) {
    if (rng.bernoulli(0.3)) {
      set_cell(clean, "r2", i, 0.0);
      set_cell(clean, "y3", i, kMissing);
    }
    if (rng.bernoulli(0.2)) censor_at(clean, spec, i, 3);
  }
  Table poisoned = clean;
  for (int i = 0; i < 60; ++i) {
    if (poisoned.cols[poisoned.find("r2")][i] == 0.0) set_cell(poisoned, "y3", i, 1e9);
    if (poisoned.cols[poisoned.find("c3")][i] == 0.0) set_cell(poisoned, "y4", i, -1e9);
  }
  SdrOptions opt;
  opt.folds = 3;
  opt.learner = LearnerConfig::glm();
  opt.seed = 4;
  const Policy policy = identity_with_support(2);
  const CurveEstimate a = smoothed_sdr(validate_wide(clean, spec), policy, opt);
  const CurveEstimate b = smoothed_sdr(validate_wide(poisoned, spec), policy, opt);
  for (int tt = 0; tt < 3; ++tt) CHECK(a.theta[tt] == b.theta[tt]);
}

TEST_CASE("smoothed_sdr: calibrated predictions stay inside [0,1] for binary outcomes") {
  DgpConfig cfg;
  cfg.study = 2;
  cfg.n = 400;
  cfg.alpha = 1.5;
  cfg.seed = 19;
  const WideDataset ds = dgp2(cfg);
  SdrOptions opt;
  opt.folds = 3;
  opt.markov_order = 1;
  opt.learner = LearnerConfig::glm();
  opt.seed = 5;
  opt.calibrate = true;
  const CurveEstimate est = smoothed_sdr(ds, study2_policy(), opt);
  CHECK(est.m_pred_min >= 0.0);
  CHECK(est.m_pred_max <= 1.0);
}

TEST_CASE("smoothed_sdr: total overlap failure is a hard error with a diagnostic") {
  const NodeSpec spec = simple_spec(2, 1);
  const Table t = random_full_table(spec, 30, 41, 1);
  const WideDataset ds = validate_wide(t, spec);
  const LongDataset ld = to_long(apply_policy(ds, identity_with_support(1)), 1);
  NuisanceOverrides oracle;
  oracle.r_z = std::vector<double>(ld.n_rows(), 1e9);  // every weight hits the cap
  SdrOptions opt;
  opt.folds = 2;
  opt.learner = LearnerConfig::glm();
  CHECK_THROWS_WITH_AS(smoothed_sdr(ds, identity_with_support(1), opt, &oracle),
                       doctest::Contains("overlap"), std::runtime_error);
}

TEST_CASE("estimators: an empty regression subset is a hard error") {
  // Nothing ever measured: the diagonal subset {C=N=R=1} is empty.
  const NodeSpec spec = simple_spec(2, 1);
  Table t = random_full_table(spec, 10, 42, 1);
  for (int i = 0; i < 10; ++i) {
    set_cell(t, "r1", i, 0.0);
    set_cell(t, "r2", i, 0.0);
    set_cell(t, "y2", i, kMissing);
    set_cell(t, "y3", i, kMissing);
  }
  const WideDataset ds = validate_wide(t, spec);
  SdrOptions opt;
  opt.folds = 2;
  opt.learner = LearnerConfig::glm();
  CHECK_THROWS_WITH_AS(smoothed_sdr(ds, identity_with_support(1), opt),
                       doctest::Contains("empty"), std::runtime_error);
  CHECK_THROWS_WITH_AS(sequential_gcomp(ds, identity_with_support(1), LearnerConfig::glm()),
                       doctest::Contains("empty"), std::runtime_error);
}

TEST_CASE("smoothed_sdr: oracle nuisances give near-unbiased estimates (study 2)") {
  const Policy policy = study2_policy();
  const OracleCurve truth = oracle_truth(2, 1.0, policy, 400000, 50);
  const int reps = 40, n = 500;
  std::vector<std::vector<double>> errs(4);

  for (int rep = 0; rep < reps; ++rep) {
    DgpConfig cfg;
    cfg.study = 2;
    cfg.n = n;
    cfg.alpha = 1.0;
    cfg.seed = derive_seed(1234, rep);
    const WideDataset ds = dgp2(cfg);
    const LongDataset ld = to_long(apply_policy(ds, policy), 1);

    NuisanceOverrides oracle;
    oracle.g_c = std::vector<double>(ld.n_rows(), 1.0);
    oracle.g_r = std::vector<double>(ld.n_rows(), 1.0);
    std::vector<double> r(ld.n_rows());
    for (int row = 0; row < ld.n_rows(); ++row) {
      const int i = ld.unit(row);
      const double gz1 = plogis(1.0 * (ds.baseline(i, 0) + ds.baseline(i, 1)));
      r[row] = ld.z_obs(row) == 1.0 ? 1.0 / gz1 : 0.0;
    }
    oracle.r_z = r;
    oracle.m = [&ds, &ld](int lambda, int row, bool shifted) {
      const int i = ld.unit(row);
      const double w = ds.baseline(i, 0), x = ds.baseline(i, 1);
      if (lambda == 1) {
        const double z = shifted ? ld.z_shift(row) : ld.z_obs(row);
        return plogis(-3.0 + w + z * x);
      }
      return plogis(-3.0 + w + x);  // future treatments pinned to 1
    };
    SdrOptions opt;
    opt.folds = 2;
    opt.truncation = 1e12;  // oracle weights are exact, leave them alone
    opt.seed = derive_seed(4321, rep);
    const CurveEstimate est = smoothed_sdr(ds, policy, opt, &oracle);
    CHECK(est.outcome_fits == 0);
    for (int tt = 0; tt < 4; ++tt) errs[tt].push_back(est.theta[tt] - truth.theta[tt]);
  }
  for (int tt = 0; tt < 4; ++tt) {
    const double bias = sample_mean(errs[tt]);
    const double se = std::sqrt(sample_variance(errs[tt]) / reps);
    CHECK(std::fabs(bias) < 3.0 * se + 1e-4);
  }
}

TEST_CASE("benchmark_sdr: per-outcome fit counts and finite estimates") {
  DgpConfig cfg;
  cfg.study = 2;
  cfg.n = 300;
  cfg.alpha = 0.0;
  cfg.seed = 91;
  const WideDataset ds = dgp2(cfg);
  SdrOptions opt;
  opt.folds = 2;
  opt.learner = LearnerConfig::glm();
  opt.seed = 6;
  const CurveEstimate est = benchmark_sdr(ds, study2_policy(), opt);
  CHECK(est.outcome_fits == 10);  // 1 + 2 + 3 + 4
  for (double v : est.theta) CHECK(std::isfinite(v));
  REQUIRE(est.has_influence);
  for (int tt = 0; tt < 4; ++tt) {
    double s = 0.0;
    for (int i = 0; i < est.n_units; ++i) s += est.influence.at(i, tt);
    CHECK(est.theta[tt] == doctest::Approx(s / est.n_units).epsilon(1e-12));
  }
}

TEST_CASE("survival outcomes: the at-risk machinery recovers a known survival curve") {
  // Pure death process with hazard 1/4 per step, independent of covariates
  // and treatment: theta(t+1) = 0.75^t in closed form.
  const int n = 4000;
  NodeSpec spec = simple_spec(3, 1, OutcomeKind::survival);
  Table t = empty_table(spec, n);
  Rng rng(907);
  for (int i = 0; i < n; ++i) {
    bool alive = true;
    for (int tt = 1; tt <= 3; ++tt) {
      const std::string s = std::to_string(tt);
      set_cell(t, "l" + s, i, rng.bernoulli(0.5) ? 1.0 : 0.0);
      set_cell(t, "z" + s, i, static_cast<double>(rng.next_u64() % 2));
      set_cell(t, "c" + s, i, 1.0);
      set_cell(t, "r" + s, i, 1.0);
      if (alive && rng.bernoulli(0.25)) alive = false;
      set_cell(t, "y" + std::to_string(tt + 1), i, alive ? 1.0 : 0.0);
    }
  }
  const WideDataset ds = validate_wide(t, spec);
  SdrOptions opt;
  opt.folds = 2;
  opt.learner = LearnerConfig::glm();
  opt.ratio = RatioMethod::categorical_analytic;
  opt.seed = 7;
  const CurveEstimate est = smoothed_sdr(ds, identity_with_support(1), opt);
  for (int tt = 0; tt < 3; ++tt) {
    const double truth = std::pow(0.75, tt + 1);
    CHECK(std::fabs(est.theta[tt] - truth) < 0.05);
    if (tt > 0) CHECK(est.theta[tt] <= est.theta[tt - 1] + 0.02);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += est.influence.at(i, tt);
    CHECK(est.theta[tt] == s / n);  // mean-of-influence identity holds exactly
  }
  // Calibration clamps every pseudo-regression into the survival range.
  CHECK(est.m_pred_min >= 0.0);
  CHECK(est.m_pred_max <= 1.0);
}

TEST_CASE("sequential_gcomp: recovers the Monte Carlo truth on the study-1 design") {
  DgpConfig cfg;
  cfg.study = 1;
  cfg.n = 5000;
  cfg.alpha = 0.0;
  cfg.seed = 2024;
  const WideDataset ds = dgp1(cfg);
  const Policy policy = study1_policy();
  const OracleCurve truth = oracle_truth(1, 0.0, policy, 1000000, 77);
  const CurveEstimate est = sequential_gcomp(ds, policy, LearnerConfig::default_ensemble());
  for (int tt = 0; tt < 4; ++tt) {
    CHECK(std::fabs(est.theta[tt] - truth.theta[tt]) <= 0.02);
  }
}
