#ifndef ECURVE_SIMULATION_HPP_
#define ECURVE_SIMULATION_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "ecurve/data.hpp"
#include "ecurve/estimators.hpp"
#include "ecurve/inference.hpp"

namespace ecurve {

// Both study designs run tau = 4 treatment times with outcomes Y_2..Y_5.
struct DgpConfig {
  int study = 1;
  int n = 1000;
  double alpha = 0.0;  // study 1: base missingness level; study 2: confounding strength
  std::uint64_t seed = 0;
};

NodeSpec dgp1_spec(int markov_order = 1);
NodeSpec dgp2_spec(int markov_order = 1);

// Study 1: categorical baseline covariate, Binomial(5, .) treatments,
// binary outcomes, sporadic outcome missingness ramped by alpha; no
// loss-to-follow-up process.
WideDataset dgp1(const DgpConfig& config);

// Study 2: two standard-normal baseline confounders, binary treatments with
// assignment strength alpha, binary outcomes, fully observed.
WideDataset dgp2(const DgpConfig& config);

// Default interventions used throughout the studies.
Policy study1_policy();  // shift the treatment down by one, floored at zero
Policy study2_policy();  // static treatment 1

struct OracleCurve {
  std::vector<double> theta;  // theta(t+1), t = 1..4
  std::vector<double> mc_se;
  long replications = 0;
};

// Counterfactual Monte Carlo truth: treatments are replaced by their policy
// values before feeding forward, everything is observed, and the mean of the
// outcome probabilities is returned with its Monte Carlo standard error.
OracleCurve oracle_truth(int study, double alpha, const Policy& policy, long replications,
                         std::uint64_t seed);

// ---------------------------------------------------------------------------
// Study runner
// ---------------------------------------------------------------------------

enum class Method { sdr_curve, sdr_unconstrained, benchmark, gcomp, smoothed_gcomp };

std::string method_name(Method m);

struct StudySpec {
  int study = 1;
  std::vector<Method> methods = {Method::sdr_curve, Method::benchmark};
  std::vector<int> n_grid = {1000};
  std::vector<double> alpha_grid = {0.0};
  int replications = 100;
  std::uint64_t seed = 1;
  SdrOptions sdr;                 // learner/J/c/k shared by all SDR-family methods
  InferenceOptions inference;
  long oracle_draws = 1000000;
  int threads = 1;
  bool has_policy_override = false;
  Policy policy_override;
};

// One replication of one method: per-time errors against the oracle truth,
// interval hits, and wall time.
struct RepRecord {
  bool failed = false;
  std::vector<double> err;     // theta_hat - theta, per time
  std::vector<char> pw_hit;    // pointwise interval covers truth, per time
  char unif_hit = 0;           // band covers the whole curve
  bool has_inference = false;
  double wall_ms = 0.0;
  int outcome_fits = 0;
};

struct MethodMetrics {
  int study = 0;
  double alpha = 0.0;
  int n = 0;
  std::string method;
  double me_x100 = 0.0;        // median error, averaged over times, x100
  double mae_x100 = 0.0;       // median absolute error, averaged over times, x100
  double pw_cov = kMissing;    // percent
  double unif_cov = kMissing;  // percent
  double rel_runtime = kMissing;
  int failures = 0;
  int outcome_fits = 0;
  double total_wall_ms = 0.0;
};

struct StudyResult {
  std::vector<MethodMetrics> rows;
};

// Aggregation of per-replication records into the reported metrics; pure, so
// the result cannot depend on replication ordering beyond the records
// themselves.
MethodMetrics aggregate_records(int study, double alpha, int n, const std::string& method,
                                const std::vector<RepRecord>& records,
                                double benchmark_total_wall_ms);

StudyResult run_study(const StudySpec& spec);

}  // namespace ecurve

#endif  // ECURVE_SIMULATION_HPP_
