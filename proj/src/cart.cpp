#include <algorithm>
#include <numeric>

#include "inet/distill.hpp"

namespace inet {

namespace {
// impurities this close count as tied so the lower (feature, threshold) wins
constexpr double kImpurityTie = 1e-12;
}  // namespace

void CartConfig::validate() const {
  if (max_depth < 1) throw ConfigError("cart.max_depth: must be at least 1");
  if (criterion != "gini") throw ConfigError("cart.criterion: only \"gini\" is supported");
  if (min_samples_split < 2) throw ConfigError("cart.min_samples_split: must be at least 2");
  if (min_samples_leaf < 1) throw ConfigError("cart.min_samples_leaf: must be at least 1");
}

double gini(std::size_t positives, std::size_t count) {
  if (count == 0) return 0.0;
  const double p = static_cast<double>(positives) / static_cast<double>(count);
  return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

SplitCandidate best_split(const Matrix& x, std::span<const int> y, std::span<const Eigen::Index> rows,
                          int min_samples_leaf) {
  SplitCandidate best;
  const std::size_t total = rows.size();
  if (total < 2) return best;
  std::size_t positives = 0;
  for (Eigen::Index r : rows) positives += static_cast<std::size_t>(y[static_cast<std::size_t>(r)]);
  const auto min_leaf = static_cast<std::size_t>(min_samples_leaf);
  const double n_total = static_cast<double>(total);

  std::vector<std::pair<double, int>> column(total);
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    for (std::size_t k = 0; k < total; ++k) {
      column[k] = {x(rows[k], f), y[static_cast<std::size_t>(rows[k])]};
    }
    std::sort(column.begin(), column.end());
    std::size_t left_pos = 0;
    for (std::size_t k = 0; k + 1 < total; ++k) {
      left_pos += static_cast<std::size_t>(column[k].second);
      const double lo = column[k].first;
      const double hi = column[k + 1].first;
      if (!(lo < hi)) continue;
      const std::size_t n_left = k + 1;
      const std::size_t n_right = total - n_left;
      if (n_left < min_leaf || n_right < min_leaf) continue;
      const double impurity = (static_cast<double>(n_left) * gini(left_pos, n_left) +
                               static_cast<double>(n_right) * gini(positives - left_pos, n_right)) /
                              n_total;
      if (!best.valid || impurity < best.impurity - kImpurityTie) {
        double threshold = 0.5 * (lo + hi);
        if (threshold <= lo) threshold = hi;
        best = {true, f, threshold, impurity};
      }
    }
  }
  return best;
}

namespace {

struct Grower {
  const Matrix& x;
  std::span<const int> y;
  const CartConfig& config;
  StandardTree& tree;

  void grow(std::size_t node, int level, const std::vector<Eigen::Index>& rows, bool degenerate) {
    const std::size_t internal = internal_count(config.max_depth);
    if (level == config.max_depth) {
      std::size_t positives = 0;
      for (Eigen::Index r : rows) positives += static_cast<std::size_t>(y[static_cast<std::size_t>(r)]);
      const double p = static_cast<double>(positives) / static_cast<double>(rows.size());
      tree.leaf_probs[node - internal] = std::clamp(p, kProbEps, 1.0 - kProbEps);
      return;
    }
    SplitCandidate split;
    if (!degenerate && rows.size() >= static_cast<std::size_t>(config.min_samples_split)) {
      std::size_t positives = 0;
      for (Eigen::Index r : rows) positives += static_cast<std::size_t>(y[static_cast<std::size_t>(r)]);
      if (positives != 0 && positives != rows.size()) split = best_split(x, y, rows, config.min_samples_leaf);
    }
    if (!split.valid) {
      tree.features[node] = 0;
      tree.splits[node] = 0.0;
      grow(2 * node + 1, level + 1, rows, true);
      grow(2 * node + 2, level + 1, rows, true);
      return;
    }
    tree.features[node] = split.feature;
    tree.splits[node] = split.threshold;
    std::vector<Eigen::Index> left;
    std::vector<Eigen::Index> right;
    for (Eigen::Index r : rows) (x(r, split.feature) < split.threshold ? left : right).push_back(r);
    grow(2 * node + 1, level + 1, left, false);
    grow(2 * node + 2, level + 1, right, false);
  }
};

}  // namespace

StandardTree cart_fit(const Matrix& x, std::span<const int> y, const CartConfig& config) {
  config.validate();
  if (x.rows() == 0 || x.cols() == 0) throw DataError("cart_fit: empty input");
  if (static_cast<std::size_t>(x.rows()) != y.size()) {
    throw DataError("cart_fit: label count does not match row count");
  }
  for (int v : y) {
    if (v != 0 && v != 1) throw DataError("cart_fit: labels must be 0 or 1");
  }
  StandardTree tree;
  tree.depth = config.max_depth;
  tree.n = x.cols();
  tree.features.assign(internal_count(config.max_depth), 0);
  tree.splits.assign(internal_count(config.max_depth), 0.0);
  tree.leaf_probs.assign(leaf_count(config.max_depth), 0.0);
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(x.rows()));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  Grower{x, y, config, tree}.grow(0, 0, rows, false);
  return tree;
}

StandardTree cart_fit(const Matrix& x, const Vector& y, const CartConfig& config) {
  std::vector<int> labels(static_cast<std::size_t>(y.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) throw DataError("cart_fit: labels must be 0 or 1");
    labels[static_cast<std::size_t>(i)] = static_cast<int>(y[i]);
  }
  return cart_fit(x, std::span<const int>(labels), config);
}

}  // namespace inet
