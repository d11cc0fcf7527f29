#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ecurve/common.hpp"
#include "ecurve/isotonic.hpp"

using namespace ecurve;

namespace {

// Exhaustive oracle for the weighted monotone least-squares problem: the
// optimum is piecewise constant on contiguous blocks with (clamped) weighted
// block means, so enumerating all 2^(n-1) contiguous partitions and keeping
// the monotone-feasible ones finds it exactly.
std::vector<double> isotonic_oracle(const std::vector<double>& y, const std::vector<double>& w,
                                    double lo, double hi) {
  const int n = static_cast<int>(y.size());
  std::vector<double> best;
  double best_loss = std::numeric_limits<double>::infinity();
  for (int mask = 0; mask < (1 << (n - 1)); ++mask) {
    std::vector<double> fit(n);
    int start = 0;
    bool feasible = true;
    double prev = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const bool boundary = i == n - 1 || (mask >> i) & 1;
      if (!boundary) continue;
      double sw = 0.0, swy = 0.0;
      for (int j = start; j <= i; ++j) {
        sw += w[j];
        swy += w[j] * y[j];
      }
      const double value = clamp(swy / sw, lo, hi);
      if (value < prev - 1e-12) {
        feasible = false;
        break;
      }
      for (int j = start; j <= i; ++j) fit[j] = value;
      prev = value;
      start = i + 1;
    }
    if (!feasible) continue;
    double loss = 0.0;
    for (int i = 0; i < n; ++i) loss += w[i] * (y[i] - fit[i]) * (y[i] - fit[i]);
    if (loss < best_loss) {
      best_loss = loss;
      best = fit;
    }
  }
  return best;
}

std::vector<double> pava_values(const std::vector<double>& x, const std::vector<double>& y,
                                const std::vector<double>& w, double lo, double hi) {
  const StepFunction fn = pava(x, y, w, lo, hi);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fn.evaluate(x[i]);
  return out;
}

}  // namespace

TEST_CASE("pava reproduces a feasible (already monotone) input") {
  std::vector<double> x = {1, 2, 3, 4}, y = {-1.0, 0.25, 0.5, 3.0}, w = {1, 1, 1, 1};
  const auto fit = pava_values(x, y, w, -1e300, 1e300);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(fit[i] == doctest::Approx(y[i]).epsilon(1e-12));
}

TEST_CASE("pava pools (3,1,2) to (2,2,2)") {
  const auto fit = pava_values({1, 2, 3}, {3, 1, 2}, {1, 1, 1}, -1e300, 1e300);
  for (double v : fit) CHECK(v == doctest::Approx(2.0));
}

TEST_CASE("pava pools then clamps: (0.9,-0.2) on [0,1] -> (0.35,0.35)") {
  const auto fit = pava_values({0, 1}, {0.9, -0.2}, {1, 1}, 0.0, 1.0);
  CHECK(fit[0] == doctest::Approx(0.35));
  CHECK(fit[1] == doctest::Approx(0.35));
}

TEST_CASE("pava input validation") {
  CHECK_THROWS(pava({}, {}, {}));
  CHECK_THROWS(pava({2, 1}, {0, 0}, {1, 1}));
  CHECK_THROWS(pava({1, 2}, {0, 0}, {1, 0}));
}

TEST_CASE("pava matches the exhaustive oracle on small weighted instances") {
  Rng rng(42);
  for (int rep = 0; rep < 300; ++rep) {
    const int n = 2 + static_cast<int>(rng.next_u64() % 7);
    std::vector<double> x(n), y(n), w(n);
    for (int i = 0; i < n; ++i) {
      x[i] = i;
      y[i] = 4.0 * rng.uniform() - 2.0;
      w[i] = 0.25 + 2.0 * rng.uniform();
    }
    const bool clamped = rng.bernoulli(0.5);
    const double lo = clamped ? -0.5 : -1e300;
    const double hi = clamped ? 0.75 : 1e300;
    const auto fit = pava_values(x, y, w, lo, hi);
    const auto oracle = isotonic_oracle(y, w, lo, hi);
    for (int i = 0; i < n; ++i) CHECK(fit[i] == doctest::Approx(oracle[i]).epsilon(1e-8));
  }
}

TEST_CASE("pava projection property against random monotone candidates") {
  Rng rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 3 + static_cast<int>(rng.next_u64() % 6);
    std::vector<double> x(n), y(n), w(n);
    for (int i = 0; i < n; ++i) {
      x[i] = i;
      y[i] = 3.0 * rng.uniform() - 1.5;
      w[i] = 0.5 + rng.uniform();
    }
    const auto fit = pava_values(x, y, w, -1e300, 1e300);
    double fit_loss = 0.0;
    for (int i = 0; i < n; ++i) fit_loss += w[i] * (y[i] - fit[i]) * (y[i] - fit[i]);
    for (int cand = 0; cand < 40; ++cand) {
      std::vector<double> g(n);
      double acc = 3.0 * rng.uniform() - 2.0;
      for (int i = 0; i < n; ++i) {
        g[i] = acc;
        acc += rng.uniform();
      }
      double g_loss = 0.0;
      for (int i = 0; i < n; ++i) g_loss += w[i] * (y[i] - g[i]) * (y[i] - g[i]);
      CHECK(fit_loss <= g_loss + 1e-10);
    }
  }
}

TEST_CASE("pava is idempotent") {
  Rng rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 2 + static_cast<int>(rng.next_u64() % 8);
    std::vector<double> x(n), y(n), w(n, 1.0);
    for (int i = 0; i < n; ++i) {
      x[i] = i;
      y[i] = rng.uniform();
    }
    const auto once = pava_values(x, y, w, -1e300, 1e300);
    const auto twice = pava_values(x, once, w, -1e300, 1e300);
    for (int i = 0; i < n; ++i) CHECK(twice[i] == doctest::Approx(once[i]).epsilon(1e-12));
  }
}

TEST_CASE("pava pre-pools ties by weighted mean") {
  // Two points share x=1: pooled target (2*0 + 1*3)/3 = 1.
  const StepFunction fn = pava({1, 1, 2}, {0, 3, 5}, {2, 1, 1}, -1e300, 1e300);
  CHECK(fn.evaluate(1.0) == doctest::Approx(1.0));
  CHECK(fn.evaluate(2.0) == doctest::Approx(5.0));
}

TEST_CASE("calibrate: fixed point when targets equal predictions") {
  std::vector<double> m = {0.1, 0.4, 0.7, 0.9};
  const StepFunction g = calibrate(m, m, 0.0, 1.0);
  for (double v : m) CHECK(g.evaluate(v) == doctest::Approx(v).epsilon(1e-12));
}

TEST_CASE("calibrate: constant targets give a constant calibrator") {
  std::vector<double> m = {0.9, 0.2, 0.5};
  std::vector<double> phi = {0.4, 0.4, 0.4};
  const StepFunction g = calibrate(m, phi, 0.0, 1.0);
  for (double v : {-5.0, 0.2, 0.5, 0.9, 5.0}) CHECK(g.evaluate(v) == doctest::Approx(0.4));
}

TEST_CASE("calibrate: outputs respect the clamp range") {
  Rng rng(3);
  std::vector<double> m(30), phi(30);
  for (int i = 0; i < 30; ++i) {
    m[i] = 2.0 * rng.uniform() - 1.0;  // some predictions below 0
    phi[i] = 3.0 * rng.uniform() - 1.0;
  }
  const StepFunction g = calibrate(m, phi, 0.0, 1.0);
  for (int i = 0; i < 30; ++i) {
    const double v = g.evaluate(m[i]);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("calibrate: fewer than two points falls back to the clamped mean") {
  const StepFunction g = calibrate({0.5}, {1.7}, 0.0, 1.0);
  CHECK(g.evaluate(-1.0) == doctest::Approx(1.0));
  CHECK(g.evaluate(0.5) == doctest::Approx(1.0));
}

TEST_CASE("calibration preserves the ranking of predictions") {
  Rng rng(19);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 20;
    std::vector<double> m(n), phi(n);
    for (int i = 0; i < n; ++i) {
      m[i] = rng.uniform();
      phi[i] = rng.uniform() + 0.2 * m[i];
    }
    const StepFunction g = calibrate(m, phi, 0.0, 1.0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (m[i] <= m[j]) CHECK(g.evaluate(m[i]) <= g.evaluate(m[j]) + 1e-12);
      }
    }
  }
}

TEST_CASE("step function evaluation: boundaries and right-continuity") {
  StepFunction fn;
  fn.breakpoints = {0.0, 1.0, 2.0};
  fn.values = {0.1, 0.5, 0.9};
  fn.lo = 0.0;
  fn.hi = 1.0;
  CHECK(fn.evaluate(-3.0) == doctest::Approx(0.1));  // below the first breakpoint
  CHECK(fn.evaluate(1.0) == doctest::Approx(0.5));   // exactly at a breakpoint
  CHECK(fn.evaluate(9.0) == doctest::Approx(0.9));   // beyond the last breakpoint

  // Between breakpoints, the left block wins; compare with a linear scan.
  Rng rng(5);
  for (int rep = 0; rep < 200; ++rep) {
    const double v = 4.0 * rng.uniform() - 1.0;
    double expect = fn.values.front();
    for (std::size_t b = 0; b < fn.breakpoints.size(); ++b) {
      if (fn.breakpoints[b] <= v) expect = fn.values[b];
    }
    CHECK(fn.evaluate(v) == doctest::Approx(expect));
  }
}
