#ifndef ECURVE_COMMON_HPP_
#define ECURVE_COMMON_HPP_

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace ecurve {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

// Soft diagnostics. Warnings never change control flow or exit codes.
void warn(const std::string& msg);
std::uint64_t warn_count();

// ---------------------------------------------------------------------------
// Deterministic RNG. splitmix64 for seed derivation, xoshiro256++ as the
// stream; distributions are hand-rolled so results are stable across
// standard libraries.
// ---------------------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t& state);

// Derive an independent substream seed from (master, a, b).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();                       // [0, 1)
  double normal();                        // standard normal, polar method
  bool bernoulli(double p);
  int binomial(int trials, double p);     // sum of bernoullis; trials small here
  int categorical(const std::vector<double>& probs);  // values 0..K-1
  // Fisher-Yates permutation of 0..n-1.
  std::vector<int> permutation(int n);

 private:
  std::uint64_t s_[4];
};

// ---------------------------------------------------------------------------
// Math helpers
// ---------------------------------------------------------------------------

inline double plogis(double x) {
  if (x > 30.0) x = 30.0;
  if (x < -30.0) x = -30.0;
  return 1.0 / (1.0 + std::exp(-x));
}

inline double logit(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return std::log(p / (1.0 - p));
}

inline double clamp(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

// Inverse standard normal CDF (Wichura's PPND16).
double normal_quantile(double p);

// Type-7 quantile (linear interpolation) of an unsorted sample.
double quantile_type7(std::vector<double> xs, double p);

double sample_mean(const std::vector<double>& xs);
// Unbiased sample variance (n-1 denominator).
double sample_variance(const std::vector<double>& xs);

// ---------------------------------------------------------------------------
// Row-major dense matrix, just enough for regression plumbing.
// ---------------------------------------------------------------------------

class Matrix {
 public:
  Matrix() : rows_(0), cols_(0) {}
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), v_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& at(std::size_t r, std::size_t c) { return v_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return v_[r * cols_ + c]; }
  const double* row_ptr(std::size_t r) const { return v_.data() + r * cols_; }
  std::vector<double>& data() { return v_; }
  const std::vector<double>& data() const { return v_; }

 private:
  std::size_t rows_, cols_;
  std::vector<double> v_;
};

// ---------------------------------------------------------------------------
// Coarse-grained parallelism over an index range. Results must be written to
// per-index slots; the function is called exactly once per index regardless
// of thread count, so output is schedule-independent.
// ---------------------------------------------------------------------------

int resolve_threads(int requested);  // 0 -> hardware concurrency
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

class Stopwatch {
 public:
  Stopwatch();
  double elapsed_ms() const;

 private:
  std::uint64_t start_ns_;
};

}  // namespace ecurve

#endif  // ECURVE_COMMON_HPP_
