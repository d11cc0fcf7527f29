#include "ecurve/learners.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_map>

namespace ecurve {

namespace {
constexpr double kProbEps = 1e-6;

double clip_prob(double p) { return clamp(p, kProbEps, 1.0 - kProbEps); }
}  // namespace

void RegressionTask::check() const {
  if (x == nullptr) throw std::invalid_argument("RegressionTask: no predictor matrix");
  if (y.size() != x->rows()) throw std::invalid_argument("RegressionTask: outcome length mismatch");
  if (!groups.empty() && groups.size() != x->rows()) {
    throw std::invalid_argument("RegressionTask: group length mismatch");
  }
  for (int r : rows) {
    if (r < 0 || r >= static_cast<int>(x->rows())) {
      throw std::invalid_argument("RegressionTask: row index out of range");
    }
    if (!std::isfinite(y[r])) throw std::invalid_argument("RegressionTask: non-finite outcome in subset");
    for (std::size_t j = 0; j < x->cols(); ++j) {
      if (!std::isfinite(x->at(r, j))) {
        throw std::invalid_argument("RegressionTask: missing predictor cell in subset");
      }
    }
    if (loss == Loss::log && (y[r] < 0.0 || y[r] > 1.0)) {
      throw std::invalid_argument("RegressionTask: log loss requires outcome in [0,1]");
    }
  }
}

std::vector<double> Model::predict(const Matrix& x) const {
  std::vector<int> rows(x.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
  return predict_rows(x, rows);
}

// ---------------------------------------------------------------------------
// GLM
// ---------------------------------------------------------------------------

namespace {

class GlmModel final : public Model {
 public:
  GlmModel(std::vector<double> beta, std::vector<int> cols, double intercept, Loss loss,
           bool ridge, int iters) {
    beta_ = std::move(beta);
    cols_ = std::move(cols);
    intercept_ = intercept;
    loss_ = loss;
    info_.kind = "glm";
    info_.ridge_fallback = ridge;
    info_.irls_iterations = iters;
  }

  std::vector<double> predict_rows(const Matrix& x, const std::vector<int>& rows) const override {
    std::vector<double> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double eta = intercept_;
      for (std::size_t j = 0; j < cols_.size(); ++j) {
        eta += beta_[j] * x.at(rows[i], cols_[j]);
      }
      out[i] = loss_ == Loss::log ? clip_prob(plogis(eta)) : eta;
    }
    return out;
  }

 private:
  std::vector<double> beta_;
  std::vector<int> cols_;  // active (non-constant) design columns
  double intercept_ = 0.0;
  Loss loss_ = Loss::squared;
};

}  // namespace

ModelPtr fit_glm(const RegressionTask& task) {
  task.check();
  const auto& rows = task.rows;
  if (rows.empty()) throw std::runtime_error("fit_glm: empty training subset");
  const int n = static_cast<int>(rows.size());

  double ymean = 0.0;
  bool y_constant = true;
  for (int r : rows) {
    ymean += task.y[r];
    if (task.y[r] != task.y[rows[0]]) y_constant = false;
  }
  ymean /= n;

  // Constant columns carry no information beyond the intercept; drop them.
  std::vector<int> cols;
  for (std::size_t j = 0; j < task.x->cols(); ++j) {
    const double v0 = task.x->at(rows[0], j);
    for (int r : rows) {
      if (task.x->at(r, j) != v0) {
        cols.push_back(static_cast<int>(j));
        break;
      }
    }
  }

  if (y_constant || cols.empty()) {
    const double pred = task.loss == Loss::log ? clip_prob(ymean) : ymean;
    return std::make_shared<GlmModel>(std::vector<double>{}, std::vector<int>{},
                                      task.loss == Loss::log ? logit(pred) : pred, task.loss,
                                      false, 0);
  }

  const int p = static_cast<int>(cols.size());
  Eigen::MatrixXd design(n, p + 1);
  Eigen::VectorXd yv(n);
  for (int i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    for (int j = 0; j < p; ++j) design(i, j + 1) = task.x->at(rows[i], cols[j]);
    yv(i) = task.y[rows[i]];
  }

  bool ridge = false;
  Eigen::VectorXd beta;
  int iters = 0;

  if (task.loss == Loss::squared) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < p + 1) {
      ridge = true;
      Eigen::MatrixXd xtx = design.transpose() * design;
      for (int j = 1; j <= p; ++j) xtx(j, j) += 1e-6;
      beta = xtx.ldlt().solve(design.transpose() * yv);
    } else {
      beta = qr.solve(yv);
    }
  } else {
    // IRLS for logistic regression.
    beta = Eigen::VectorXd::Zero(p + 1);
    beta(0) = logit(clamp(ymean, kProbEps, 1.0 - kProbEps));
    for (iters = 1; iters <= 100; ++iters) {
      Eigen::VectorXd eta = design * beta;
      Eigen::VectorXd mu(n), wdiag(n);
      for (int i = 0; i < n; ++i) {
        mu(i) = plogis(eta(i));
        wdiag(i) = std::max(mu(i) * (1.0 - mu(i)), 1e-10);
      }
      Eigen::VectorXd score = design.transpose() * (yv - mu);
      if (score.lpNorm<Eigen::Infinity>() <= 1e-8) break;
      Eigen::MatrixXd xtwx = design.transpose() * wdiag.asDiagonal() * design;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(xtwx);
      Eigen::VectorXd step;
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        ridge = true;
        for (int j = 1; j <= p; ++j) xtwx(j, j) += 1e-6;
        step = xtwx.ldlt().solve(score);
      } else {
        step = ldlt.solve(score);
      }
      if (!step.allFinite()) {
        ridge = true;
        break;
      }
      beta += step;
    }
  }

  if (ridge) warn("fit_glm: rank-deficient design, ridge fallback (1e-6) used");

  std::vector<double> bvec(p);
  for (int j = 0; j < p; ++j) bvec[j] = beta(j + 1);
  return std::make_shared<GlmModel>(std::move(bvec), cols, beta(0), task.loss, ridge, iters);
}

// ---------------------------------------------------------------------------
// GBT wrapper
// ---------------------------------------------------------------------------

namespace {

class GbtModel final : public Model {
 public:
  GbtModel(std::shared_ptr<const GbtBooster> booster, int n_trees) : booster_(std::move(booster)), n_trees_(n_trees) {
    info_.kind = "gbt";
  }

  std::vector<double> predict_rows(const Matrix& x, const std::vector<int>& rows) const override {
    return booster_->predict(x, rows, n_trees_);
  }

 private:
  std::shared_ptr<const GbtBooster> booster_;
  int n_trees_;
};

class InterceptModel final : public Model {
 public:
  InterceptModel(double value, Loss loss) : value_(loss == Loss::log ? clip_prob(value) : value) {
    info_.kind = "intercept";
  }
  std::vector<double> predict_rows(const Matrix&, const std::vector<int>& rows) const override {
    return std::vector<double>(rows.size(), value_);
  }

 private:
  double value_;
};

// Exact cell means over distinct predictor rows; unseen cells fall back to
// the training mean. Only sensible on small discrete supports.
class SaturatedModel final : public Model {
 public:
  SaturatedModel(const Matrix& x, const std::vector<double>& y, const std::vector<int>& rows,
                 Loss loss)
      : loss_(loss) {
    info_.kind = "saturated";
    double total = 0.0;
    for (int r : rows) {
      auto& cell = cells_[key(x, r)];
      cell.first += y[r];
      cell.second += 1.0;
      total += y[r];
    }
    fallback_ = rows.empty() ? 0.0 : total / static_cast<double>(rows.size());
  }

  std::vector<double> predict_rows(const Matrix& x, const std::vector<int>& rows) const override {
    std::vector<double> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto it = cells_.find(key(x, rows[i]));
      double v = it == cells_.end() ? fallback_ : it->second.first / it->second.second;
      out[i] = loss_ == Loss::log ? clip_prob(v) : v;
    }
    return out;
  }

 private:
  static std::string key(const Matrix& x, int row) {
    std::string k(x.cols() * sizeof(double), '\0');
    std::memcpy(k.data(), x.row_ptr(row), x.cols() * sizeof(double));
    return k;
  }

  std::unordered_map<std::string, std::pair<double, double>> cells_;
  double fallback_ = 0.0;
  Loss loss_;
};

class StackedModel final : public Model {
 public:
  StackedModel(std::vector<ModelPtr> members, std::vector<double> weights, Loss loss)
      : members_(std::move(members)), weights_(std::move(weights)), loss_(loss) {
    info_.kind = "ensemble";
    info_.ensemble_weights = weights_;
  }

  std::vector<double> predict_rows(const Matrix& x, const std::vector<int>& rows) const override {
    std::vector<double> out(rows.size(), 0.0);
    for (std::size_t m = 0; m < members_.size(); ++m) {
      if (weights_[m] == 0.0) continue;
      const std::vector<double> pm = members_[m]->predict_rows(x, rows);
      for (std::size_t i = 0; i < rows.size(); ++i) out[i] += weights_[m] * pm[i];
    }
    if (loss_ == Loss::log) {
      for (double& v : out) v = clip_prob(v);
    }
    return out;
  }

 private:
  std::vector<ModelPtr> members_;
  std::vector<double> weights_;
  Loss loss_;
};

// All ensemble members are plain GBTs that differ only in rounds: one
// boosting pass at the largest round count serves every member.
bool rounds_only_gbt(const std::vector<LearnerConfig>& members) {
  for (const auto& m : members) {
    if (m.kind != LearnerConfig::Kind::gbt) return false;
    const GbtParams& a = m.gbt;
    const GbtParams& b = members[0].gbt;
    if (a.growth != b.growth || a.max_depth != b.max_depth || a.max_leaves != b.max_leaves ||
        a.learning_rate != b.learning_rate || a.max_bins != b.max_bins ||
        a.min_leaf_rows != b.min_leaf_rows || a.min_child_hess != b.min_child_hess ||
        a.lambda_l2 != b.lambda_l2) {
      return false;
    }
  }
  return !members.empty();
}

std::vector<ModelPtr> fit_members(const RegressionTask& task, const std::vector<int>& train_rows,
                                  const std::vector<LearnerConfig>& members) {
  std::vector<ModelPtr> fits(members.size());
  RegressionTask sub = task;
  sub.rows = train_rows;
  if (rounds_only_gbt(members)) {
    GbtParams params = members[0].gbt;
    for (const auto& m : members) params.rounds = std::max(params.rounds, m.gbt.rounds);
    auto booster = GbtBooster::fit(*task.x, task.y, train_rows, task.loss, params);
    for (std::size_t m = 0; m < members.size(); ++m) {
      fits[m] = std::make_shared<GbtModel>(booster, members[m].gbt.rounds);
    }
    return fits;
  }
  for (std::size_t m = 0; m < members.size(); ++m) {
    try {
      fits[m] = fit_learner(sub, members[m]);
    } catch (const std::exception& e) {
      warn(std::string("fit_ensemble: member fit failed and was dropped: ") + e.what());
      fits[m] = nullptr;
    }
  }
  return fits;
}

void enumerate_simplex(int m, double step, std::vector<double>& current, int pos, double rem,
                       const std::function<void(const std::vector<double>&)>& visit) {
  if (pos == m - 1) {
    current[pos] = rem;
    visit(current);
    return;
  }
  const int max_units = static_cast<int>(std::round(rem / step));
  for (int u = 0; u <= max_units; ++u) {
    current[pos] = u * step;
    enumerate_simplex(m, step, current, pos + 1, rem - u * step, visit);
  }
}

}  // namespace

ModelPtr fit_gbt(const RegressionTask& task, const GbtParams& params) {
  task.check();
  if (task.rows.empty()) throw std::runtime_error("fit_gbt: empty training subset");
  auto booster = GbtBooster::fit(*task.x, task.y, task.rows, task.loss, params);
  return std::make_shared<GbtModel>(booster, params.rounds);
}

ModelPtr fit_ensemble(const RegressionTask& task, const LearnerConfig& config) {
  task.check();
  if (config.members.size() < 2) {
    throw std::invalid_argument("fit_ensemble: need at least 2 members");
  }
  const auto& all_rows = task.rows;
  if (all_rows.empty()) throw std::runtime_error("fit_ensemble: empty training subset");

  // Stacking folds over groups (units) when provided, else over rows.
  const int v_folds = std::max(2, config.stack_folds);
  std::vector<int> group_of_row(task.x->rows(), 0);
  int n_groups;
  if (task.groups.empty()) {
    std::unordered_map<int, int> remap;
    for (int r : all_rows) {
      auto it = remap.emplace(r, static_cast<int>(remap.size())).first;
      group_of_row[r] = it->second;
    }
    n_groups = static_cast<int>(remap.size());
  } else {
    std::unordered_map<int, int> remap;
    for (int r : all_rows) {
      auto it = remap.emplace(task.groups[r], static_cast<int>(remap.size())).first;
      group_of_row[r] = it->second;
    }
    n_groups = static_cast<int>(remap.size());
  }
  if (n_groups < v_folds) {
    throw std::runtime_error("fit_ensemble: too few units for the stacking folds");
  }
  const FoldPartition cv = fold_split(n_groups, v_folds, derive_seed(config.seed, 0x737461636bULL));

  const int m = static_cast<int>(config.members.size());
  // Out-of-fold member predictions on the training subset.
  std::vector<std::vector<double>> oof(m, std::vector<double>(all_rows.size(), 0.0));
  std::vector<char> member_ok(m, 1);
  for (int v = 0; v < v_folds; ++v) {
    std::vector<int> fit_rows, hold_rows, hold_pos;
    for (std::size_t i = 0; i < all_rows.size(); ++i) {
      const int r = all_rows[i];
      if (cv.fold_of(group_of_row[r]) == v) {
        hold_rows.push_back(r);
        hold_pos.push_back(static_cast<int>(i));
      } else {
        fit_rows.push_back(r);
      }
    }
    if (fit_rows.empty() || hold_rows.empty()) continue;
    const std::vector<ModelPtr> fits = fit_members(task, fit_rows, config.members);
    for (int mm = 0; mm < m; ++mm) {
      if (!fits[mm]) {
        member_ok[mm] = 0;
        continue;
      }
      const std::vector<double> pred = fits[mm]->predict_rows(*task.x, hold_rows);
      for (std::size_t i = 0; i < hold_rows.size(); ++i) oof[mm][hold_pos[i]] = pred[i];
    }
  }

  const std::vector<ModelPtr> full_fits = fit_members(task, all_rows, config.members);
  std::vector<int> alive;
  for (int mm = 0; mm < m; ++mm) {
    if (member_ok[mm] && full_fits[mm]) alive.push_back(mm);
  }
  if (alive.empty()) throw std::runtime_error("fit_ensemble: all member fits failed");

  const int ma = static_cast<int>(alive.size());
  auto grid_loss = [&](const std::vector<double>& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < all_rows.size(); ++i) {
      double pred = 0.0;
      for (int a = 0; a < ma; ++a) pred += w[a] * oof[alive[a]][i];
      const double yi = task.y[all_rows[i]];
      if (task.loss == Loss::log) {
        const double p = clip_prob(pred);
        s -= yi * std::log(p) + (1.0 - yi) * std::log(1.0 - p);
      } else {
        s += (yi - pred) * (yi - pred);
      }
    }
    return s / static_cast<double>(all_rows.size());
  };

  std::vector<double> best_w(ma, 0.0);
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<double> current(ma, 0.0);
  enumerate_simplex(ma, 0.05, current, 0, 1.0, [&](const std::vector<double>& w) {
    const double l = grid_loss(w);
    if (l < best_loss - 1e-12) {
      best_loss = l;
      best_w = w;
    }
  });

  // Tie rule: if a single member matches the best grid loss, use it alone.
  int best_vertex = -1;
  double best_vertex_loss = std::numeric_limits<double>::infinity();
  for (int a = 0; a < ma; ++a) {
    std::vector<double> w(ma, 0.0);
    w[a] = 1.0;
    const double l = grid_loss(w);
    if (l < best_vertex_loss) {
      best_vertex_loss = l;
      best_vertex = a;
    }
  }
  if (best_vertex >= 0 && best_vertex_loss <= best_loss + 1e-12) {
    std::fill(best_w.begin(), best_w.end(), 0.0);
    best_w[best_vertex] = 1.0;
  }

  std::vector<ModelPtr> kept;
  for (int a = 0; a < ma; ++a) kept.push_back(full_fits[alive[a]]);
  return std::make_shared<StackedModel>(std::move(kept), std::move(best_w), task.loss);
}

ModelPtr fit_learner(const RegressionTask& task, const LearnerConfig& config) {
  switch (config.kind) {
    case LearnerConfig::Kind::glm:
      return fit_glm(task);
    case LearnerConfig::Kind::gbt:
      return fit_gbt(task, config.gbt);
    case LearnerConfig::Kind::intercept: {
      task.check();
      double s = 0.0;
      for (int r : task.rows) s += task.y[r];
      return std::make_shared<InterceptModel>(
          task.rows.empty() ? 0.0 : s / static_cast<double>(task.rows.size()), task.loss);
    }
    case LearnerConfig::Kind::saturated:
      task.check();
      return std::make_shared<SaturatedModel>(*task.x, task.y, task.rows, task.loss);
    case LearnerConfig::Kind::ensemble:
      return fit_ensemble(task, config);
  }
  throw std::logic_error("fit_learner: unknown learner kind");
}

LearnerConfig LearnerConfig::glm() {
  LearnerConfig c;
  c.kind = Kind::glm;
  return c;
}

LearnerConfig LearnerConfig::gbt_rounds(int rounds) {
  LearnerConfig c;
  c.kind = Kind::gbt;
  c.gbt.rounds = rounds;
  return c;
}

LearnerConfig LearnerConfig::intercept() {
  LearnerConfig c;
  c.kind = Kind::intercept;
  return c;
}

LearnerConfig LearnerConfig::saturated() {
  LearnerConfig c;
  c.kind = Kind::saturated;
  return c;
}

LearnerConfig LearnerConfig::default_ensemble() {
  // Boosted trees at 25/50/100 rounds, grown leaf-wise with a 31-leaf budget
  // the way lightgbm-class libraries do.
  LearnerConfig c;
  c.kind = Kind::ensemble;
  c.members = {gbt_rounds(25), gbt_rounds(50), gbt_rounds(100)};
  for (auto& m : c.members) m.gbt.growth = GbtGrowth::leaf_wise;
  return c;
}

// ---------------------------------------------------------------------------
// Cross-fitting
// ---------------------------------------------------------------------------

std::vector<double> CrossFitModel::predict_rows(const Matrix& x, const std::vector<int>& rows,
                                                const std::vector<int>& unit_of_row) const {
  std::vector<double> out(rows.size(), kMissing);
  std::vector<std::vector<int>> by_fold(models.size());
  std::vector<std::vector<int>> pos(models.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int f = folds.fold_of(unit_of_row[rows[i]]);
    by_fold[f].push_back(rows[i]);
    pos[f].push_back(static_cast<int>(i));
  }
  for (std::size_t f = 0; f < models.size(); ++f) {
    if (by_fold[f].empty()) continue;
    const std::vector<double> pred = models[f]->predict_rows(x, by_fold[f]);
    for (std::size_t i = 0; i < by_fold[f].size(); ++i) out[pos[f][i]] = pred[i];
  }
  return out;
}

std::vector<double> CrossFitModel::predict(const Matrix& x,
                                           const std::vector<int>& unit_of_row) const {
  std::vector<int> rows(x.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
  return predict_rows(x, rows, unit_of_row);
}

CrossFitModel crossfit(const RegressionTask& task, const std::vector<int>& unit_of_row,
                       const FoldPartition& folds, const LearnerConfig& config, int threads) {
  for (int r : task.rows) {
    if (unit_of_row[r] < 0 || unit_of_row[r] >= static_cast<int>(folds.label.size())) {
      throw std::runtime_error("crossfit: partition does not cover all units in the task");
    }
  }
  CrossFitModel cf;
  cf.folds = folds;
  cf.models.resize(folds.n_folds);
  std::vector<std::vector<int>> train_rows(folds.n_folds);
  for (int j = 0; j < folds.n_folds; ++j) {
    for (int r : task.rows) {
      if (folds.fold_of(unit_of_row[r]) != j) train_rows[j].push_back(r);
    }
    if (train_rows[j].empty()) {
      throw std::runtime_error("crossfit: fold " + std::to_string(j) +
                               " has an empty training subset");
    }
  }
  parallel_for(static_cast<std::size_t>(folds.n_folds), threads, [&](std::size_t j) {
    RegressionTask sub = task;
    sub.rows = train_rows[j];
    // Per-fold seeds keep member-internal splits independent across folds.
    LearnerConfig cfg = config;
    cfg.seed = derive_seed(config.seed, 0x63665ULL, j);
    cf.models[j] = fit_learner(sub, cfg);
  });
  return cf;
}

}  // namespace ecurve
