#include "ecurve/isotonic.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace ecurve {

double StepFunction::evaluate(double v) const {
  if (breakpoints.empty()) return clamp(0.0, lo, hi);
  // Largest breakpoint <= v; below the first breakpoint use the first block.
  auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), v);
  if (it == breakpoints.begin()) return values.front();
  const std::size_t idx = static_cast<std::size_t>(it - breakpoints.begin()) - 1;
  return values[idx];
}

StepFunction pava(const std::vector<double>& x, const std::vector<double>& y,
                  const std::vector<double>& w, double lo, double hi) {
  if (x.empty()) throw std::invalid_argument("pava: empty input");
  if (x.size() != y.size() || x.size() != w.size()) {
    throw std::invalid_argument("pava: length mismatch");
  }
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    if (x[i] > x[i + 1]) throw std::invalid_argument("pava: x is not sorted ascending");
  }
  for (double wi : w) {
    if (!(wi > 0.0)) throw std::invalid_argument("pava: weights must be positive");
  }

  // Pre-pool ties in x by weighted mean.
  std::vector<double> px, py, pw;
  for (std::size_t i = 0; i < x.size();) {
    std::size_t j = i;
    double sw = 0.0, swy = 0.0;
    while (j < x.size() && x[j] == x[i]) {
      sw += w[j];
      swy += w[j] * y[j];
      ++j;
    }
    px.push_back(x[i]);
    py.push_back(swy / sw);
    pw.push_back(sw);
    i = j;
  }

  // Pool adjacent violators over the tie-pooled sequence.
  struct Block {
    double weight, mean;
    std::size_t count;
  };
  std::vector<Block> stack;
  stack.reserve(px.size());
  for (std::size_t i = 0; i < px.size(); ++i) {
    Block b{pw[i], py[i], 1};
    while (!stack.empty() && stack.back().mean >= b.mean) {
      const Block& top = stack.back();
      b.mean = (top.weight * top.mean + b.weight * b.mean) / (top.weight + b.weight);
      b.weight += top.weight;
      b.count += top.count;
      stack.pop_back();
    }
    stack.push_back(b);
  }

  StepFunction fn;
  fn.lo = lo;
  fn.hi = hi;
  fn.breakpoints = px;
  fn.values.resize(px.size());
  std::size_t pos = 0;
  for (const Block& b : stack) {
    const double v = clamp(b.mean, lo, hi);
    for (std::size_t c = 0; c < b.count; ++c) fn.values[pos++] = v;
  }
  return fn;
}

StepFunction calibrate(const std::vector<double>& preliminary,
                       const std::vector<double>& pseudo_outcomes,
                       double lo, double hi, const std::vector<double>* weights) {
  if (preliminary.size() != pseudo_outcomes.size()) {
    throw std::invalid_argument("calibrate: length mismatch");
  }
  const std::size_t n = preliminary.size();
  if (n < 2) {
    double sw = 0.0, swy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double wi = weights ? (*weights)[i] : 1.0;
      sw += wi;
      swy += wi * pseudo_outcomes[i];
    }
    StepFunction fn;
    fn.lo = lo;
    fn.hi = hi;
    fn.breakpoints = {0.0};
    fn.values = {clamp(sw > 0.0 ? swy / sw : 0.0, lo, hi)};
    return fn;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preliminary[a] < preliminary[b];
  });
  std::vector<double> xs(n), ys(n), ws(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = preliminary[order[i]];
    ys[i] = pseudo_outcomes[order[i]];
    ws[i] = weights ? (*weights)[order[i]] : 1.0;
  }
  return pava(xs, ys, ws, lo, hi);
}

}  // namespace ecurve
