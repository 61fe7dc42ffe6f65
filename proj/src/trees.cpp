#include "inet/trees.hpp"

#include <algorithm>
#include <cmath>

#include "inet/nncore.hpp"

namespace inet {

namespace {

constexpr std::pair<TreeFamily, std::string_view> kFamilyNames[] = {
    {TreeFamily::standard_dt, "standard_dt"},
    {TreeFamily::univariate_sdt, "univariate_sdt"},
    {TreeFamily::standard_sdt, "standard_sdt"},
};

void check_input(Eigen::Index n, std::span<const double> x, const char* who) {
  if (static_cast<Eigen::Index>(x.size()) != n) {
    throw DataError(std::string(who) + ": input has " + std::to_string(x.size()) +
                    " features, tree expects " + std::to_string(n));
  }
}

void check_theta(std::span<const double> theta_g, const ThetaLayout& layout, const char* who) {
  if (theta_g.size() != layout.total) {
    throw DataError(std::string(who) + ": parameter vector has length " +
                    std::to_string(theta_g.size()) + ", layout expects " +
                    std::to_string(layout.total));
  }
}

Eigen::Index argmax_lowest(std::span<const double> values) {
  Eigen::Index best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<Eigen::Index>(i);
  }
  return best;
}

void check_depth(int depth, Eigen::Index n, const char* who) {
  if (depth < 1 || depth > 20) throw ConfigError(std::string(who) + ": depth must lie in [1,20]");
  if (n < 1) throw ConfigError(std::string(who) + ": feature count must be positive");
}

// Max-path descent over right-branch pre-activations: go right iff z > 0 (P_right > 0.5).
template <typename Logit>
std::size_t descend(int depth, Logit&& logit) {
  std::size_t node = 0;
  const std::size_t internal = internal_count(depth);
  while (node < internal) node = logit(node) > 0.0 ? 2 * node + 2 : 2 * node + 1;
  return node - internal;
}

template <typename Logit>
double mixture(int depth, const Matrix& leaf_logits, Logit&& logit) {
  const std::size_t internal = internal_count(depth);
  std::vector<double> right(internal);
  for (std::size_t j = 0; j < internal; ++j) right[j] = sigmoid(logit(j));
  std::vector<double> reach(internal + leaf_count(depth));
  routing_reach(depth, right, reach);
  double out = 0.0;
  for (std::size_t l = 0; l < leaf_count(depth); ++l) {
    const auto li = static_cast<Eigen::Index>(l);
    out += reach[internal + l] * leaf_class1(leaf_logits(li, 0), leaf_logits(li, 1));
  }
  return out;
}

}  // namespace

std::string_view to_string(TreeFamily family) {
  for (const auto& [f, name] : kFamilyNames) {
    if (f == family) return name;
  }
  return "unknown";
}

TreeFamily family_from_string(std::string_view name) {
  for (const auto& [f, n] : kFamilyNames) {
    if (n == name) return f;
  }
  throw ConfigError("unknown tree family '" + std::string(name) + "'");
}

std::size_t param_count(TreeFamily family, Eigen::Index n, int depth) {
  return ThetaLayout::make(family, n, depth).total;
}

ThetaLayout ThetaLayout::make(TreeFamily family, Eigen::Index n, int depth) {
  check_depth(depth, n, "ThetaLayout");
  ThetaLayout l;
  l.family = family;
  l.n = n;
  l.depth = depth;
  const std::size_t internal = internal_count(depth);
  const std::size_t leaves = leaf_count(depth);
  const auto nn = static_cast<std::size_t>(n);
  switch (family) {
    case TreeFamily::standard_dt:
      l.identifiers = 0;
      l.splits = internal * nn;
      l.leaves = 2 * internal * nn;
      l.total = l.leaves + leaves;
      break;
    case TreeFamily::univariate_sdt:
      l.identifiers = 0;
      l.filters = internal * nn;
      l.biases = 2 * internal * nn;
      l.leaves = l.biases + internal;
      l.total = l.leaves + 2 * leaves;
      break;
    case TreeFamily::standard_sdt:
      l.filters = 0;
      l.biases = internal * nn;
      l.leaves = l.biases + internal;
      l.total = l.leaves + 2 * leaves;
      break;
  }
  return l;
}

void StandardTree::validate() const {
  check_depth(depth, n, "StandardTree");
  if (features.size() != internal_count(depth) || splits.size() != internal_count(depth) ||
      leaf_probs.size() != leaf_count(depth)) {
    throw DataError("StandardTree: node arrays do not match depth " + std::to_string(depth));
  }
  for (std::size_t j = 0; j < features.size(); ++j) {
    if (features[j] < 0 || features[j] >= n) throw DataError("StandardTree: feature index out of range");
    if (!std::isfinite(splits[j])) throw DataError("StandardTree: non-finite split");
  }
  for (double p : leaf_probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("StandardTree: leaf probability outside [0,1]");
  }
}

void SoftTree::validate() const {
  check_depth(depth, n, "SoftTree");
  const auto internal = static_cast<Eigen::Index>(internal_count(depth));
  const auto leaves = static_cast<Eigen::Index>(leaf_count(depth));
  if (filters.rows() != internal || filters.cols() != n || biases.size() != internal ||
      leaf_logits.rows() != leaves || leaf_logits.cols() != 2) {
    throw DataError("SoftTree: parameter shapes do not match depth and feature count");
  }
  if (!filters.allFinite() || !biases.allFinite() || !leaf_logits.allFinite()) {
    throw DataError("SoftTree: non-finite parameters");
  }
}

void UnivariateSoftTree::validate() const {
  check_depth(depth, n, "UnivariateSoftTree");
  const std::size_t internal = internal_count(depth);
  if (features.size() != internal || static_cast<std::size_t>(filter_values.size()) != internal ||
      static_cast<std::size_t>(biases.size()) != internal ||
      leaf_logits.rows() != static_cast<Eigen::Index>(leaf_count(depth)) || leaf_logits.cols() != 2) {
    throw DataError("UnivariateSoftTree: parameter shapes do not match depth");
  }
  for (Eigen::Index f : features) {
    if (f < 0 || f >= n) throw DataError("UnivariateSoftTree: feature index out of range");
  }
  if (!filter_values.allFinite() || !biases.allFinite() || !leaf_logits.allFinite()) {
    throw DataError("UnivariateSoftTree: non-finite parameters");
  }
}

TreeFamily family_of(const TreeModel& tree) {
  switch (tree.index()) {
    case 0:
      return TreeFamily::standard_dt;
    case 1:
      return TreeFamily::standard_sdt;
    default:
      return TreeFamily::univariate_sdt;
  }
}

Eigen::Index feature_count(const TreeModel& tree) {
  return std::visit([](const auto& t) { return t.n; }, tree);
}

StandardTree decode_standard(std::span<const double> theta_g, const ThetaLayout& layout) {
  if (layout.family != TreeFamily::standard_dt) throw ConfigError("decode_standard: wrong layout family");
  check_theta(theta_g, layout, "decode_standard");
  const auto n = static_cast<std::size_t>(layout.n);
  StandardTree tree;
  tree.depth = layout.depth;
  tree.n = layout.n;
  for (std::size_t j = 0; j < layout.internal_nodes(); ++j) {
    const Eigen::Index f = argmax_lowest(theta_g.subspan(layout.identifiers + j * n, n));
    tree.features.push_back(f);
    tree.splits.push_back(theta_g[layout.splits + j * n + static_cast<std::size_t>(f)]);
  }
  tree.leaf_probs.assign(theta_g.begin() + static_cast<std::ptrdiff_t>(layout.leaves),
                         theta_g.begin() + static_cast<std::ptrdiff_t>(layout.leaves + layout.leaf_nodes()));
  return tree;
}

SoftTree decode_soft(std::span<const double> theta_g, const ThetaLayout& layout) {
  if (layout.family != TreeFamily::standard_sdt) throw ConfigError("decode_soft: wrong layout family");
  check_theta(theta_g, layout, "decode_soft");
  const auto internal = static_cast<Eigen::Index>(layout.internal_nodes());
  const auto leaves = static_cast<Eigen::Index>(layout.leaf_nodes());
  SoftTree tree;
  tree.depth = layout.depth;
  tree.n = layout.n;
  tree.filters.resize(internal, layout.n);
  tree.biases.resize(internal);
  tree.leaf_logits.resize(leaves, 2);
  for (Eigen::Index j = 0; j < internal; ++j) {
    for (Eigen::Index i = 0; i < layout.n; ++i) {
      tree.filters(j, i) = theta_g[layout.filters + static_cast<std::size_t>(j * layout.n + i)];
    }
    tree.biases[j] = theta_g[layout.biases + static_cast<std::size_t>(j)];
  }
  for (Eigen::Index l = 0; l < leaves; ++l) {
    tree.leaf_logits(l, 0) = theta_g[layout.leaves + static_cast<std::size_t>(2 * l)];
    tree.leaf_logits(l, 1) = theta_g[layout.leaves + static_cast<std::size_t>(2 * l + 1)];
  }
  return tree;
}

UnivariateSoftTree decode_univariate(std::span<const double> theta_g, const ThetaLayout& layout) {
  if (layout.family != TreeFamily::univariate_sdt) {
    throw ConfigError("decode_univariate: wrong layout family");
  }
  check_theta(theta_g, layout, "decode_univariate");
  const auto n = static_cast<std::size_t>(layout.n);
  const auto internal = static_cast<Eigen::Index>(layout.internal_nodes());
  const auto leaves = static_cast<Eigen::Index>(layout.leaf_nodes());
  UnivariateSoftTree tree;
  tree.depth = layout.depth;
  tree.n = layout.n;
  tree.filter_values.resize(internal);
  tree.biases.resize(internal);
  tree.leaf_logits.resize(leaves, 2);
  for (Eigen::Index j = 0; j < internal; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    const Eigen::Index f = argmax_lowest(theta_g.subspan(layout.identifiers + ju * n, n));
    tree.features.push_back(f);
    tree.filter_values[j] = theta_g[layout.filters + ju * n + static_cast<std::size_t>(f)];
    tree.biases[j] = theta_g[layout.biases + ju];
  }
  for (Eigen::Index l = 0; l < leaves; ++l) {
    tree.leaf_logits(l, 0) = theta_g[layout.leaves + static_cast<std::size_t>(2 * l)];
    tree.leaf_logits(l, 1) = theta_g[layout.leaves + static_cast<std::size_t>(2 * l + 1)];
  }
  return tree;
}

TreeModel decode(std::span<const double> theta_g, const ThetaLayout& layout) {
  switch (layout.family) {
    case TreeFamily::standard_dt:
      return decode_standard(theta_g, layout);
    case TreeFamily::standard_sdt:
      return decode_soft(theta_g, layout);
    case TreeFamily::univariate_sdt:
      return decode_univariate(theta_g, layout);
  }
  throw ConfigError("decode: unknown family");
}

std::vector<double> encode(const TreeModel& tree) {
  const ThetaLayout layout = ThetaLayout::make(family_of(tree), feature_count(tree),
                                               std::visit([](const auto& t) { return t.depth; }, tree));
  std::vector<double> theta(layout.total, 0.0);
  const auto n = static_cast<std::size_t>(layout.n);
  if (const auto* t = std::get_if<StandardTree>(&tree)) {
    t->validate();
    for (std::size_t j = 0; j < layout.internal_nodes(); ++j) {
      theta[layout.identifiers + j * n + static_cast<std::size_t>(t->features[j])] = 1.0;
      for (std::size_t i = 0; i < n; ++i) theta[layout.splits + j * n + i] = t->splits[j];
    }
    std::copy(t->leaf_probs.begin(), t->leaf_probs.end(), theta.begin() + static_cast<std::ptrdiff_t>(layout.leaves));
    return theta;
  }
  const Matrix* logits = nullptr;
  if (const auto* t = std::get_if<SoftTree>(&tree)) {
    t->validate();
    for (std::size_t j = 0; j < layout.internal_nodes(); ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        theta[layout.filters + j * n + i] = t->filters(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
      }
      theta[layout.biases + j] = t->biases[static_cast<Eigen::Index>(j)];
    }
    logits = &t->leaf_logits;
  } else {
    const auto& u = std::get<UnivariateSoftTree>(tree);
    u.validate();
    for (std::size_t j = 0; j < layout.internal_nodes(); ++j) {
      const auto f = static_cast<std::size_t>(u.features[j]);
      theta[layout.identifiers + j * n + f] = 1.0;
      theta[layout.filters + j * n + f] = u.filter_values[static_cast<Eigen::Index>(j)];
      theta[layout.biases + j] = u.biases[static_cast<Eigen::Index>(j)];
    }
    logits = &u.leaf_logits;
  }
  for (Eigen::Index l = 0; l < logits->rows(); ++l) {
    theta[layout.leaves + static_cast<std::size_t>(2 * l)] = (*logits)(l, 0);
    theta[layout.leaves + static_cast<std::size_t>(2 * l + 1)] = (*logits)(l, 1);
  }
  return theta;
}

double eval_standard(const StandardTree& tree, std::span<const double> x) {
  check_input(tree.n, x, "eval_standard");
  std::size_t node = 0;
  const std::size_t internal = internal_count(tree.depth);
  while (node < internal) {
    const bool goes_left = x[static_cast<std::size_t>(tree.features[node])] < tree.splits[node];
    node = goes_left ? 2 * node + 1 : 2 * node + 2;
  }
  return tree.leaf_probs[node - internal];
}

double eval_soft(const SoftTree& tree, std::span<const double> x, bool use_max_path) {
  check_input(tree.n, x, "eval_soft");
  const Eigen::Map<const Vector> xv(x.data(), tree.n);
  auto logit = [&](std::size_t j) {
    const auto ji = static_cast<Eigen::Index>(j);
    return tree.filters.row(ji).dot(xv) + tree.biases[ji];
  };
  if (use_max_path) {
    const auto l = static_cast<Eigen::Index>(descend(tree.depth, logit));
    return leaf_class1(tree.leaf_logits(l, 0), tree.leaf_logits(l, 1));
  }
  return mixture(tree.depth, tree.leaf_logits, logit);
}

double eval_univariate(const UnivariateSoftTree& tree, std::span<const double> x,
                       bool use_max_path) {
  check_input(tree.n, x, "eval_univariate");
  auto logit = [&](std::size_t j) {
    const auto ji = static_cast<Eigen::Index>(j);
    return tree.filter_values[ji] * x[static_cast<std::size_t>(tree.features[j])] + tree.biases[ji];
  };
  if (use_max_path) {
    const auto l = static_cast<Eigen::Index>(descend(tree.depth, logit));
    return leaf_class1(tree.leaf_logits(l, 0), tree.leaf_logits(l, 1));
  }
  return mixture(tree.depth, tree.leaf_logits, logit);
}

double evaluate(const TreeModel& tree, std::span<const double> x, bool use_max_path) {
  if (const auto* t = std::get_if<StandardTree>(&tree)) return eval_standard(*t, x);
  if (const auto* t = std::get_if<SoftTree>(&tree)) return eval_soft(*t, x, use_max_path);
  return eval_univariate(std::get<UnivariateSoftTree>(tree), x, use_max_path);
}

Vector evaluate(const TreeModel& tree, const Matrix& x, bool use_max_path) {
  if (x.cols() != feature_count(tree)) {
    throw DataError("evaluate: input has " + std::to_string(x.cols()) + " features, tree expects " +
                    std::to_string(feature_count(tree)));
  }
  Vector out(x.rows());
  std::vector<double> row(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) row[static_cast<std::size_t>(c)] = x(r, c);
    out[r] = evaluate(tree, row, use_max_path);
  }
  return out;
}

std::vector<double> leaf_path_probabilities(const SoftTree& tree, std::span<const double> x) {
  check_input(tree.n, x, "leaf_path_probabilities");
  const Eigen::Map<const Vector> xv(x.data(), tree.n);
  const std::size_t internal = internal_count(tree.depth);
  std::vector<double> right(internal);
  for (std::size_t j = 0; j < internal; ++j) {
    const auto ji = static_cast<Eigen::Index>(j);
    right[j] = sigmoid(tree.filters.row(ji).dot(xv) + tree.biases[ji]);
  }
  std::vector<double> reach(internal + leaf_count(tree.depth));
  routing_reach(tree.depth, right, reach);
  return {reach.begin() + static_cast<std::ptrdiff_t>(internal), reach.end()};
}

SoftTree to_soft_tree(const UnivariateSoftTree& tree) {
  tree.validate();
  SoftTree out;
  out.depth = tree.depth;
  out.n = tree.n;
  out.filters = Matrix::Zero(static_cast<Eigen::Index>(tree.features.size()), tree.n);
  for (std::size_t j = 0; j < tree.features.size(); ++j) {
    out.filters(static_cast<Eigen::Index>(j), tree.features[j]) = tree.filter_values[static_cast<Eigen::Index>(j)];
  }
  out.biases = tree.biases;
  out.leaf_logits = tree.leaf_logits;
  return out;
}

void routing_reach(int depth, std::span<const double> right_prob, std::span<double> reach) {
  const std::size_t internal = internal_count(depth);
  reach[0] = 1.0;
  for (std::size_t j = 0; j < internal; ++j) {
    reach[2 * j + 1] = reach[j] * (1.0 - right_prob[j]);
    reach[2 * j + 2] = reach[j] * right_prob[j];
  }
}

void routing_backward(int depth, std::span<const double> right_prob,
                      std::span<const double> reach, std::span<double> reach_grad,
                      std::span<double> right_grad) {
  for (std::size_t j = internal_count(depth); j-- > 0;) {
    const double g_left = reach_grad[2 * j + 1];
    const double g_right = reach_grad[2 * j + 2];
    right_grad[j] = reach[j] * (g_right - g_left);
    reach_grad[j] += g_left * (1.0 - right_prob[j]) + g_right * right_prob[j];
  }
}

double eval_standard_soft(std::span<const double> theta_g, const ThetaLayout& layout,
                          std::span<const double> x, double gamma, std::span<double> grad,
                          double scale) {
  if (layout.family != TreeFamily::standard_dt) {
    throw ConfigError("eval_standard_soft: wrong layout family");
  }
  if (!(gamma > 0.0)) throw ConfigError("eval_standard_soft: gamma must be positive");
  check_theta(theta_g, layout, "eval_standard_soft");
  check_input(layout.n, x, "eval_standard_soft");
  const auto n = static_cast<std::size_t>(layout.n);
  const std::size_t internal = layout.internal_nodes();
  const std::size_t leaves = layout.leaf_nodes();
  const bool want_grad = !grad.empty();

  // Per (node, feature) routing sigmoids; reused by the backward pass.
  std::vector<double> gate(internal * n);
  std::vector<double> right(internal);
  for (std::size_t j = 0; j < internal; ++j) {
    double p_left = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = sigmoid(gamma * (theta_g[layout.splits + j * n + i] - x[i]));
      gate[j * n + i] = s;
      p_left += theta_g[layout.identifiers + j * n + i] * s;
    }
    right[j] = 1.0 - p_left;
  }
  std::vector<double> reach(internal + leaves);
  routing_reach(layout.depth, right, reach);
  double out = 0.0;
  for (std::size_t l = 0; l < leaves; ++l) out += reach[internal + l] * theta_g[layout.leaves + l];
  if (!want_grad) return out;

  std::vector<double> reach_grad(internal + leaves, 0.0);
  for (std::size_t l = 0; l < leaves; ++l) {
    reach_grad[internal + l] = theta_g[layout.leaves + l];
    grad[layout.leaves + l] += scale * reach[internal + l];
  }
  std::vector<double> right_grad(internal);
  routing_backward(layout.depth, right, reach, reach_grad, right_grad);
  for (std::size_t j = 0; j < internal; ++j) {
    const double d_left = -right_grad[j] * scale;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = gate[j * n + i];
      grad[layout.identifiers + j * n + i] += d_left * s;
      grad[layout.splits + j * n + i] +=
          d_left * theta_g[layout.identifiers + j * n + i] * gamma * s * (1.0 - s);
    }
  }
  return out;
}

double eval_theta_soft(std::span<const double> theta_g, const ThetaLayout& layout,
                       std::span<const double> x, const SoftEvalOptions& options,
                       std::span<double> grad, double scale) {
  if (layout.family == TreeFamily::standard_dt) {
    return eval_standard_soft(theta_g, layout, x, options.gamma, grad, scale);
  }
  check_theta(theta_g, layout, "eval_theta_soft");
  check_input(layout.n, x, "eval_theta_soft");
  const bool univariate = layout.family == TreeFamily::univariate_sdt;
  const auto n = static_cast<std::size_t>(layout.n);
  const std::size_t internal = layout.internal_nodes();
  const std::size_t leaves = layout.leaf_nodes();

  std::vector<double> right(internal);
  for (std::size_t j = 0; j < internal; ++j) {
    double z = theta_g[layout.biases + j];
    for (std::size_t i = 0; i < n; ++i) {
      double w = theta_g[layout.filters + j * n + i];
      if (univariate) w *= theta_g[layout.identifiers + j * n + i];
      z += w * x[i];
    }
    right[j] = sigmoid(z);
  }
  std::vector<double> reach(internal + leaves);
  routing_reach(layout.depth, right, reach);
  std::vector<double> q(leaves);
  double out = 0.0;
  for (std::size_t l = 0; l < leaves; ++l) {
    q[l] = leaf_class1(theta_g[layout.leaves + 2 * l], theta_g[layout.leaves + 2 * l + 1]);
    out += reach[internal + l] * q[l];
  }
  if (grad.empty()) return out;

  std::vector<double> reach_grad(internal + leaves, 0.0);
  for (std::size_t l = 0; l < leaves; ++l) {
    reach_grad[internal + l] = q[l];
    const double dq = scale * reach[internal + l] * q[l] * (1.0 - q[l]);
    grad[layout.leaves + 2 * l] -= dq;
    grad[layout.leaves + 2 * l + 1] += dq;
  }
  std::vector<double> right_grad(internal);
  routing_backward(layout.depth, right, reach, reach_grad, right_grad);
  for (std::size_t j = 0; j < internal; ++j) {
    const double dz = scale * right_grad[j] * right[j] * (1.0 - right[j]);
    grad[layout.biases + j] += dz;
    for (std::size_t i = 0; i < n; ++i) {
      if (univariate) {
        const double id = theta_g[layout.identifiers + j * n + i];
        const double value = theta_g[layout.filters + j * n + i];
        grad[layout.filters + j * n + i] += dz * x[i] * id;
        grad[layout.identifiers + j * n + i] += dz * x[i] * value;
      } else {
        grad[layout.filters + j * n + i] += dz * x[i];
      }
    }
  }
  return out;
}

}  // namespace inet
