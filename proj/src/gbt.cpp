#include "ecurve/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ecurve {

namespace {

// Upper bin boundaries per feature, built from the training rows. Bin b
// holds v <= cuts[b]; the last bin is open-ended.
struct BinMapper {
  std::vector<std::vector<double>> cuts;

  int n_bins(int f) const { return static_cast<int>(cuts[f].size()) + 1; }

  int bin(int f, double v) const {
    const auto& c = cuts[f];
    return static_cast<int>(std::upper_bound(c.begin(), c.end(), v) - c.begin());
  }
};

BinMapper build_bins(const Matrix& x, const std::vector<int>& rows, int max_bins) {
  const int p = static_cast<int>(x.cols());
  BinMapper mapper;
  mapper.cuts.resize(p);
  std::vector<double> vals(rows.size());
  for (int f = 0; f < p; ++f) {
    for (std::size_t i = 0; i < rows.size(); ++i) vals[i] = x.at(rows[i], f);
    std::sort(vals.begin(), vals.end());
    std::vector<double> distinct;
    for (std::size_t i = 0; i < vals.size(); ++i) {
      if (i == 0 || vals[i] != vals[i - 1]) distinct.push_back(vals[i]);
    }
    auto& cuts = mapper.cuts[f];
    if (static_cast<int>(distinct.size()) <= max_bins) {
      for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
        cuts.push_back(0.5 * (distinct[i] + distinct[i + 1]));
      }
    } else {
      // Quantile cuts on the sorted training values, placed between
      // neighbouring order statistics so no observed value sits on a cut.
      for (int b = 1; b < max_bins; ++b) {
        const double q = static_cast<double>(b) / max_bins;
        const std::size_t idx = std::min(
            vals.size() - 1,
            std::max<std::size_t>(1, static_cast<std::size_t>(q * static_cast<double>(vals.size()))));
        const double cut = 0.5 * (vals[idx - 1] + vals[idx]);
        if (cuts.empty() || cut > cuts.back()) cuts.push_back(cut);
      }
    }
  }
  return mapper;
}

struct HistCell {
  double grad = 0.0, hess = 0.0;
  int count = 0;
};

struct SplitInfo {
  double gain = 0.0;
  int feature = -1, bin = -1;
};

// Best gain split of one node histogram; ties break toward the lowest
// feature and bin so fits are deterministic.
SplitInfo best_split(const HistCell* hist, int p, int max_node_bins, const BinMapper& mapper,
                     const GbtParams& params, double gp, double hp, int cp) {
  SplitInfo best;
  if (cp < 2 * params.min_leaf_rows) return best;
  const double parent_score = gp * gp / (hp + params.lambda_l2);
  for (int f = 0; f < p; ++f) {
    double gl = 0.0, hl = 0.0;
    int cl = 0;
    const int nb = mapper.n_bins(f);
    for (int b = 0; b + 1 < nb; ++b) {
      const HistCell& cell = hist[static_cast<std::size_t>(f) * max_node_bins + b];
      gl += cell.grad;
      hl += cell.hess;
      cl += cell.count;
      const double gr = gp - gl, hr = hp - hl;
      const int cr = cp - cl;
      if (cl < params.min_leaf_rows || cr < params.min_leaf_rows) continue;
      if (hl < params.min_child_hess || hr < params.min_child_hess) continue;
      const double gain =
          gl * gl / (hl + params.lambda_l2) + gr * gr / (hr + params.lambda_l2) - parent_score;
      if (gain > best.gain + 1e-12) {
        best = SplitInfo{gain, f, b};
      }
    }
  }
  return best;
}

}  // namespace

double GbtBooster::Tree::eval(const double* x) const {
  int idx = 0;
  while (nodes[idx].feature >= 0) {
    idx = x[nodes[idx].feature] <= nodes[idx].threshold ? nodes[idx].left : nodes[idx].right;
  }
  return nodes[idx].value;
}

std::shared_ptr<const GbtBooster> GbtBooster::fit(const Matrix& x, const std::vector<double>& y,
                                                  const std::vector<int>& train_rows, Loss loss,
                                                  const GbtParams& params) {
  if (train_rows.empty()) throw std::runtime_error("gbt: empty training subset");
  const int n = static_cast<int>(train_rows.size());
  const int p = static_cast<int>(x.cols());

  auto booster = std::make_shared<GbtBooster>();
  booster->loss_ = loss;

  double ymean = 0.0;
  for (int i = 0; i < n; ++i) ymean += y[train_rows[i]];
  ymean /= n;
  booster->base_score_ =
      loss == Loss::log ? logit(clamp(ymean, 1e-6, 1.0 - 1e-6)) : ymean;

  if (params.rounds == 0) return booster;

  const BinMapper mapper = build_bins(x, train_rows, params.max_bins);

  // Feature-major binned training matrix.
  std::vector<std::vector<std::uint16_t>> binned(p, std::vector<std::uint16_t>(n));
  int max_node_bins = 2;
  for (int f = 0; f < p; ++f) {
    max_node_bins = std::max(max_node_bins, mapper.n_bins(f));
    for (int i = 0; i < n; ++i) {
      binned[f][i] = static_cast<std::uint16_t>(mapper.bin(f, x.at(train_rows[i], f)));
    }
  }

  std::vector<double> raw(n, booster->base_score_);
  std::vector<double> grad(n), hess(n);
  std::vector<int> row_node(n);

  auto fill_hist = [&](const std::vector<int>& rows, std::vector<HistCell>& hist) {
    std::fill(hist.begin(), hist.end(), HistCell{});
    for (int f = 0; f < p; ++f) {
      const std::uint16_t* bins = binned[f].data();
      HistCell* cells = hist.data() + static_cast<std::size_t>(f) * max_node_bins;
      for (int i : rows) {
        HistCell& cell = cells[bins[i]];
        cell.grad += grad[i];
        cell.hess += hess[i];
        cell.count += 1;
      }
    }
  };

  booster->trees_.reserve(params.rounds);
  for (int round = 0; round < params.rounds; ++round) {
    for (int i = 0; i < n; ++i) {
      if (loss == Loss::log) {
        const double prob = plogis(raw[i]);
        grad[i] = prob - y[train_rows[i]];
        hess[i] = std::max(prob * (1.0 - prob), 1e-12);
      } else {
        grad[i] = raw[i] - y[train_rows[i]];
        hess[i] = 1.0;
      }
    }

    Tree tree;
    tree.nodes.push_back(Node{});
    std::fill(row_node.begin(), row_node.end(), 0);

    if (params.growth == GbtGrowth::leaf_wise) {
      // Best-first growth: repeatedly split the live leaf with the largest
      // gain until the leaf budget is exhausted.
      struct Leaf {
        int node;
        std::vector<int> rows;
        double gsum = 0.0, hsum = 0.0;
        SplitInfo split;
      };
      std::vector<HistCell> hist(static_cast<std::size_t>(p) * max_node_bins);
      std::vector<Leaf> leaves;
      {
        Leaf root;
        root.node = 0;
        root.rows.resize(n);
        for (int i = 0; i < n; ++i) root.rows[i] = i;
        for (int i = 0; i < n; ++i) {
          root.gsum += grad[i];
          root.hsum += hess[i];
        }
        fill_hist(root.rows, hist);
        root.split = best_split(hist.data(), p, max_node_bins, mapper, params, root.gsum, root.hsum, n);
        leaves.push_back(std::move(root));
      }
      while (static_cast<int>(leaves.size()) < params.max_leaves) {
        int pick = -1;
        for (std::size_t c = 0; c < leaves.size(); ++c) {
          if (leaves[c].split.feature < 0) continue;
          if (pick < 0 || leaves[c].split.gain > leaves[pick].split.gain) {
            pick = static_cast<int>(c);
          }
        }
        if (pick < 0) break;
        Leaf parent = std::move(leaves[pick]);
        leaves.erase(leaves.begin() + pick);

        Node& nd = tree.nodes[parent.node];
        nd.feature = parent.split.feature;
        nd.threshold = mapper.cuts[parent.split.feature][parent.split.bin];
        nd.left = static_cast<int>(tree.nodes.size());
        nd.right = nd.left + 1;
        tree.nodes.push_back(Node{});
        tree.nodes.push_back(Node{});

        Leaf left, right;
        left.node = nd.left;
        right.node = nd.right;
        const std::uint16_t* bins = binned[parent.split.feature].data();
        for (int i : parent.rows) {
          if (bins[i] <= parent.split.bin) {
            left.rows.push_back(i);
            left.gsum += grad[i];
            left.hsum += hess[i];
          } else {
            right.rows.push_back(i);
            right.gsum += grad[i];
            right.hsum += hess[i];
          }
        }
        fill_hist(left.rows, hist);
        left.split = best_split(hist.data(), p, max_node_bins, mapper, params, left.gsum, left.hsum,
                                static_cast<int>(left.rows.size()));
        fill_hist(right.rows, hist);
        right.split = best_split(hist.data(), p, max_node_bins, mapper, params, right.gsum, right.hsum,
                                 static_cast<int>(right.rows.size()));
        leaves.push_back(std::move(left));
        leaves.push_back(std::move(right));
      }
      for (const Leaf& leaf : leaves) {
        tree.nodes[leaf.node].value =
            -params.learning_rate * leaf.gsum / (leaf.hsum + params.lambda_l2 + 1e-12);
        for (int i : leaf.rows) row_node[i] = leaf.node;
      }
      for (int i = 0; i < n; ++i) raw[i] += tree.nodes[row_node[i]].value;
      booster->trees_.push_back(std::move(tree));
      continue;
    }

    // Depth-wise growth: split every level at once up to max_depth.
    std::vector<int> active = {0};
    const int max_nodes_per_level = 1 << params.max_depth;
    std::vector<HistCell> hist(static_cast<std::size_t>(max_nodes_per_level) * p * max_node_bins);

    for (int depth = 0; depth < params.max_depth && !active.empty(); ++depth) {
      const int n_active = static_cast<int>(active.size());
      std::fill(hist.begin(), hist.begin() + static_cast<std::size_t>(n_active) * p * max_node_bins,
                HistCell{});
      std::vector<int> slot(tree.nodes.size(), -1);
      for (int a = 0; a < n_active; ++a) slot[active[a]] = a;

      for (int f = 0; f < p; ++f) {
        const std::uint16_t* bins = binned[f].data();
        for (int i = 0; i < n; ++i) {
          const int s = row_node[i] >= 0 ? slot[row_node[i]] : -1;
          if (s < 0) continue;
          HistCell& cell =
              hist[(static_cast<std::size_t>(s) * p + f) * max_node_bins + bins[i]];
          cell.grad += grad[i];
          cell.hess += hess[i];
          cell.count += 1;
        }
      }

      std::vector<SplitInfo> best(n_active);
      for (int a = 0; a < n_active; ++a) {
        double gp = 0.0, hp = 0.0;
        int cp = 0;
        for (int b = 0; b < max_node_bins; ++b) {
          const HistCell& cell = hist[(static_cast<std::size_t>(a) * p) * max_node_bins + b];
          gp += cell.grad;
          hp += cell.hess;
          cp += cell.count;
        }
        best[a] = best_split(hist.data() + static_cast<std::size_t>(a) * p * max_node_bins, p,
                             max_node_bins, mapper, params, gp, hp, cp);
      }

      // Materialize the splits and reassign rows.
      std::vector<int> next_active;
      std::vector<int> split_bin(tree.nodes.size(), -1);
      for (int a = 0; a < n_active; ++a) {
        if (best[a].feature < 0) continue;
        const int node = active[a];
        Node& nd = tree.nodes[node];
        nd.feature = best[a].feature;
        nd.threshold = mapper.cuts[best[a].feature][best[a].bin];
        nd.left = static_cast<int>(tree.nodes.size());
        nd.right = nd.left + 1;
        tree.nodes.push_back(Node{});
        tree.nodes.push_back(Node{});
        next_active.push_back(nd.left);
        next_active.push_back(nd.right);
        split_bin[node] = best[a].bin;
      }
      if (next_active.empty()) break;
      for (int i = 0; i < n; ++i) {
        const int node = row_node[i];
        if (node < 0 || node >= static_cast<int>(split_bin.size()) || split_bin[node] < 0) continue;
        const Node& nd = tree.nodes[node];
        row_node[i] = binned[nd.feature][i] <= split_bin[node] ? nd.left : nd.right;
      }
      active = std::move(next_active);
    }

    // Leaf values: damped Newton step, learning rate folded in.
    std::vector<double> gsum(tree.nodes.size(), 0.0), hsum(tree.nodes.size(), 0.0);
    for (int i = 0; i < n; ++i) {
      gsum[row_node[i]] += grad[i];
      hsum[row_node[i]] += hess[i];
    }
    for (std::size_t nd = 0; nd < tree.nodes.size(); ++nd) {
      if (tree.nodes[nd].feature < 0) {
        tree.nodes[nd].value =
            -params.learning_rate * gsum[nd] / (hsum[nd] + params.lambda_l2 + 1e-12);
      }
    }
    for (int i = 0; i < n; ++i) raw[i] += tree.nodes[row_node[i]].value;
    booster->trees_.push_back(std::move(tree));
  }
  return booster;
}

double GbtBooster::predict_row(const double* x, int n_trees) const {
  n_trees = std::min<int>(n_trees, static_cast<int>(trees_.size()));
  double raw = base_score_;
  for (int k = 0; k < n_trees; ++k) raw += trees_[k].eval(x);
  if (loss_ == Loss::log) return clamp(plogis(raw), 1e-6, 1.0 - 1e-6);
  return raw;
}

std::vector<double> GbtBooster::predict(const Matrix& x, const std::vector<int>& rows,
                                        int n_trees) const {
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out[i] = predict_row(x.row_ptr(rows[i]), n_trees);
  }
  return out;
}

}  // namespace ecurve
