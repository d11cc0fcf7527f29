#include "ecurve/commands.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "ecurve/csv.hpp"

namespace ecurve {

namespace {

namespace fs = std::filesystem;

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
}

Json estimate_to_json(const CurveEstimate& est, const InferenceResult* inf) {
  Json j;
  j["estimator"] = est.estimator;
  j["n"] = est.n_units;
  j["theta"] = est.theta;
  j["outcome_fits"] = est.outcome_fits;
  j["propensity_fits"] = est.propensity_fits;
  j["wall_ms"] = est.wall_ms;
  if (!est.ratio_method.empty()) j["ratio_method"] = est.ratio_method;
  if (std::isfinite(est.m_pred_min)) {
    j["m_pred_min"] = est.m_pred_min;
    j["m_pred_max"] = est.m_pred_max;
  }
  if (inf) {
    j["sigma"] = inf->sigma;
    j["pw_lo"] = inf->pw_lo;
    j["pw_hi"] = inf->pw_hi;
    j["c_alpha"] = inf->c_alpha;
    j["c_alpha_used"] = inf->c_alpha_used;
    j["band_lo"] = inf->band_lo;
    j["band_hi"] = inf->band_hi;
    j["alpha"] = inf->alpha;
    j["bootstrap_draws"] = inf->draws;
    j["multiplier"] = inf->multiplier;
  }
  if (!est.weights.by_time.empty()) {
    Json wj = Json::array();
    for (const auto& ts : est.weights.by_time) {
      wj.push_back({{"s", ts.time},
                    {"mean_base", ts.mean_base},
                    {"max_base", ts.max_base},
                    {"frac_trunc_base", ts.frac_trunc_base},
                    {"mean_diag", ts.mean_diag},
                    {"max_diag", ts.max_diag},
                    {"frac_trunc_diag", ts.frac_trunc_diag}});
    }
    j["weight_summary"] = wj;
  }
  return j;
}

Table plot_table(const CurveEstimate& est, const InferenceResult* inf) {
  Table t;
  const int tau = static_cast<int>(est.theta.size());
  t.names = {"t", "estimate", "pw_lo", "pw_hi", "band_lo", "band_hi"};
  t.cols.assign(6, std::vector<double>(tau, kMissing));
  for (int i = 0; i < tau; ++i) {
    t.cols[0][i] = i + 2;  // outcome time t+1
    t.cols[1][i] = est.theta[i];
    if (inf) {
      t.cols[2][i] = inf->pw_lo[i];
      t.cols[3][i] = inf->pw_hi[i];
      t.cols[4][i] = inf->band_lo[i];
      t.cols[5][i] = inf->band_hi[i];
    }
  }
  return t;
}

Table influence_table(const CurveEstimate& est) {
  Table t;
  const int tau = static_cast<int>(est.theta.size());
  for (int c = 0; c < tau; ++c) t.names.push_back("phi_t" + std::to_string(c + 2));
  t.cols.assign(tau, std::vector<double>(est.influence.rows()));
  for (std::size_t i = 0; i < est.influence.rows(); ++i) {
    for (int c = 0; c < tau; ++c) t.cols[c][i] = est.influence.at(i, c);
  }
  return t;
}

Table weights_table(const WeightTable& w) {
  Table t;
  t.names = {"s", "mean_base", "max_base", "frac_trunc_base", "mean_diag", "max_diag",
             "frac_trunc_diag"};
  t.cols.assign(7, std::vector<double>(w.by_time.size()));
  for (std::size_t i = 0; i < w.by_time.size(); ++i) {
    const auto& ts = w.by_time[i];
    t.cols[0][i] = ts.time;
    t.cols[1][i] = ts.mean_base;
    t.cols[2][i] = ts.max_base;
    t.cols[3][i] = ts.frac_trunc_base;
    t.cols[4][i] = ts.mean_diag;
    t.cols[5][i] = ts.max_diag;
    t.cols[6][i] = ts.frac_trunc_diag;
  }
  return t;
}

std::string format_metric(double v) {
  if (is_missing(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

void run_estimate(const RunConfig& cfg) {
  if (!cfg.has_nodespec) throw std::runtime_error("estimate: config needs a 'nodespec' block");
  if (cfg.input.empty()) throw std::runtime_error("estimate: config needs 'input'");
  fs::create_directories(cfg.output);

  const Table raw = read_csv(cfg.input);
  const WideDataset ds = validate_wide(raw, cfg.nodespec);

  Json results;
  results["timestamp"] = timestamp_utc();
  results["config"] = cfg.resolved();
  results["dataset"] = {{"path", cfg.input}, {"n", ds.n_units()}, {"hash", file_hash(cfg.input)}};

  const int threads = resolve_threads(cfg.threads);
  Json estimates = Json::object();
  for (const std::string& name : cfg.estimators) {
    SdrOptions opt = cfg.sdr;
    opt.seed = cfg.seed;
    opt.threads = threads;
    CurveEstimate est;
    if (name == "sdr") {
      opt.calibrate = cfg.sdr.calibrate;
      est = smoothed_sdr(ds, cfg.policy, opt);
    } else if (name == "sdr_unconstrained") {
      opt.calibrate = false;
      est = smoothed_sdr(ds, cfg.policy, opt);
    } else if (name == "benchmark") {
      est = benchmark_sdr(ds, cfg.policy, opt);
    } else if (name == "gcomp") {
      est = sequential_gcomp(ds, cfg.policy, opt.learner, threads);
    } else if (name == "smoothed_gcomp") {
      est = smoothed_gcomp(ds, cfg.policy, opt.markov_order, opt.learner, threads);
    } else {
      throw std::runtime_error("estimate: unknown estimator '" + name + "'");
    }

    InferenceResult inf;
    bool has_inf = false;
    if (est.has_influence) {
      InferenceOptions iopt = cfg.inference;
      iopt.seed = derive_seed(cfg.seed, 0x1f3aULL);
      iopt.threads = threads;
      inf = infer(est, iopt);
      has_inf = true;
    }
    estimates[name] = estimate_to_json(est, has_inf ? &inf : nullptr);
    write_csv(plot_table(est, has_inf ? &inf : nullptr), cfg.output + "/plot_" + name + ".csv");
    if (!est.weights.by_time.empty()) {
      write_csv(weights_table(est.weights), cfg.output + "/weights_" + name + ".csv");
    }
    if (cfg.write_influence && est.has_influence) {
      write_csv(influence_table(est), cfg.output + "/influence_" + name + ".csv");
    }
  }
  results["estimates"] = estimates;
  write_text(cfg.output + "/results.json", results.dump(2) + "\n");
}

void run_simulate(const RunConfig& cfg) {
  if (!cfg.has_study) throw std::runtime_error("simulate: config needs a 'simulate' block");
  fs::create_directories(cfg.output);
  const StudyResult res = run_study(cfg.study);

  std::ofstream metrics(cfg.output + "/metrics.csv");
  metrics << "study,alpha,n,method,me_x100,mae_x100,pw_cov,unif_cov,rel_runtime\n";
  for (const auto& row : res.rows) {
    metrics << row.study << ',' << row.alpha << ',' << row.n << ',' << row.method << ','
            << format_metric(row.me_x100) << ',' << format_metric(row.mae_x100) << ','
            << format_metric(row.pw_cov) << ',' << format_metric(row.unif_cov) << ','
            << format_metric(row.rel_runtime) << "\n";
  }
  metrics.close();

  std::ofstream cov(cfg.output + "/coverage.csv");
  cov << "study,alpha,n,method,pw_cov,unif_cov\n";
  for (const auto& row : res.rows) {
    if (is_missing(row.pw_cov)) continue;
    cov << row.study << ',' << row.alpha << ',' << row.n << ',' << row.method << ','
        << format_metric(row.pw_cov) << ',' << format_metric(row.unif_cov) << "\n";
  }
  cov.close();

  Json echo;
  echo["timestamp"] = timestamp_utc();
  echo["config"] = cfg.resolved();
  Json rows = Json::array();
  for (const auto& row : res.rows) {
    rows.push_back({{"study", row.study},
                    {"alpha", row.alpha},
                    {"n", row.n},
                    {"method", row.method},
                    {"me_x100", row.me_x100},
                    {"mae_x100", row.mae_x100},
                    {"failures", row.failures},
                    {"outcome_fits", row.outcome_fits},
                    {"total_wall_ms", row.total_wall_ms}});
  }
  echo["rows"] = rows;
  write_text(cfg.output + "/simulate.json", echo.dump(2) + "\n");
}

void run_contrast(const std::string& dir_a, const std::string& dir_b, const std::string& estimator,
                  double alpha, int draws, std::uint64_t seed, const std::string& output_dir) {
  auto load = [&](const std::string& dir) {
    std::ifstream in(dir + "/results.json");
    if (!in) throw std::runtime_error("contrast: cannot open " + dir + "/results.json");
    Json j = Json::parse(in);
    const Table inf = read_csv(dir + "/influence_" + estimator + ".csv");
    CurveEstimate est;
    est.estimator = estimator;
    est.n_units = static_cast<int>(inf.rows());
    const int tau = static_cast<int>(inf.cols.size());
    est.theta = j.at("estimates").at(estimator).at("theta").get<std::vector<double>>();
    est.influence = Matrix(inf.rows(), tau);
    for (std::size_t i = 0; i < inf.rows(); ++i) {
      for (int c = 0; c < tau; ++c) est.influence.at(i, c) = inf.cols[c][i];
    }
    est.has_influence = true;
    const std::string hash = j.at("dataset").at("hash").get<std::string>();
    return std::make_pair(est, hash);
  };
  const auto [est_a, hash_a] = load(dir_a);
  const auto [est_b, hash_b] = load(dir_b);
  if (hash_a != hash_b || est_a.n_units != est_b.n_units) {
    throw std::runtime_error("contrast: the two runs cover different datasets or units");
  }

  const CurveEstimate diff = contrast(est_a, est_b);
  InferenceOptions iopt;
  iopt.alpha = alpha;
  iopt.bootstrap_draws = draws;
  iopt.seed = seed;
  const InferenceResult inf = infer(diff, iopt);

  fs::create_directories(output_dir);
  Json out;
  out["timestamp"] = timestamp_utc();
  out["a"] = dir_a;
  out["b"] = dir_b;
  out["estimator"] = estimator;
  out["dataset_hash"] = hash_a;
  out["contrast"] = estimate_to_json(diff, &inf);
  write_text(output_dir + "/contrast.json", out.dump(2) + "\n");
  write_csv(plot_table(diff, &inf), output_dir + "/plot_contrast.csv");
}

void run_convert(const RunConfig& cfg) {
  if (!cfg.has_nodespec) throw std::runtime_error("convert: config needs a 'nodespec' block");
  if (cfg.input.empty()) throw std::runtime_error("convert: config needs 'input'");
  fs::create_directories(cfg.output);
  const Table raw = read_csv(cfg.input);
  WideDataset ds = validate_wide(raw, cfg.nodespec);
  ds = apply_policy(ds, cfg.policy);
  const LongDataset ld = to_long(ds, cfg.nodespec.markov_order);
  write_csv(ld.to_table(), cfg.output + "/long.csv");
}

}  // namespace ecurve
