#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "inet/distill.hpp"
#include "inet/nncore.hpp"

namespace inet {

void SDTTrainConfig::validate() const {
  if (depth < 1) throw ConfigError("sdt.depth: must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("sdt.learning_rate: must be positive");
  if (criterion != "binary_crossentropy") {
    throw ConfigError("sdt.criterion: only \"binary_crossentropy\" is supported");
  }
  if (!(lambda_reg >= 0.0)) throw ConfigError("sdt.lambda_reg: must be non-negative");
  if (!(beta > 0.0)) throw ConfigError("sdt.beta: must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("sdt.weight_decay: must be non-negative");
  if (univariate && !(beta2 >= 0.0)) throw ConfigError("sdt.beta2: must be non-negative");
  if (epochs < 1) throw ConfigError("sdt.epochs: must be at least 1");
  if (patience < 1) throw ConfigError("sdt.patience: must be at least 1");
  if (batch_size < 1) throw ConfigError("sdt.batch_size: must be at least 1");
  if (!(valid_fraction >= 0.0 && valid_fraction < 1.0)) {
    throw ConfigError("sdt.valid_fraction: must lie in [0,1)");
  }
}

SdtParams SdtParams::zeros(int depth, Eigen::Index n) {
  const auto internal = static_cast<Eigen::Index>(internal_count(depth));
  const auto leaves = static_cast<Eigen::Index>(leaf_count(depth));
  return {Matrix::Zero(internal, n), Vector::Zero(internal), Matrix::Zero(leaves, 2)};
}

int SdtParams::depth() const {
  int d = 0;
  while ((Eigen::Index{1} << d) < phi.rows()) ++d;
  return d;
}

std::size_t SdtParams::size() const {
  return static_cast<std::size_t>(w.size() + b.size() + phi.size());
}

std::vector<double> SdtParams::flatten() const {
  std::vector<double> out;
  out.reserve(size());
  for (Eigen::Index j = 0; j < w.rows(); ++j) {
    for (Eigen::Index i = 0; i < w.cols(); ++i) out.push_back(w(j, i));
  }
  for (Eigen::Index j = 0; j < b.size(); ++j) out.push_back(b[j]);
  for (Eigen::Index l = 0; l < phi.rows(); ++l) {
    out.push_back(phi(l, 0));
    out.push_back(phi(l, 1));
  }
  return out;
}

void SdtParams::assign(std::span<const double> flat) {
  if (flat.size() != size()) throw DataError("SdtParams::assign: length mismatch");
  std::size_t k = 0;
  for (Eigen::Index j = 0; j < w.rows(); ++j) {
    for (Eigen::Index i = 0; i < w.cols(); ++i) w(j, i) = flat[k++];
  }
  for (Eigen::Index j = 0; j < b.size(); ++j) b[j] = flat[k++];
  for (Eigen::Index l = 0; l < phi.rows(); ++l) {
    phi(l, 0) = flat[k++];
    phi(l, 1) = flat[k++];
  }
}

namespace {

Vector mask_row(const Matrix& w, Eigen::Index j, double beta2) {
  Vector logits = beta2 * w.row(j).cwiseAbs().transpose();
  logits.array() -= logits.maxCoeff();
  Vector s = logits.array().exp();
  return s / s.sum();
}

int node_level(std::size_t j) {
  int level = 0;
  while (((std::size_t{2} << level) - 1) <= j) ++level;
  return level;
}

}  // namespace

Matrix effective_filters(const Matrix& w, const SDTTrainConfig& config) {
  if (!config.univariate) return w;
  Matrix out = w;
  for (Eigen::Index j = 0; j < w.rows(); ++j) {
    out.row(j) = w.row(j).cwiseProduct(mask_row(w, j, config.beta2).transpose());
  }
  return out;
}

double sdt_objective(const SdtParams& params, const Matrix& x, const Vector& targets,
                     const SDTTrainConfig& config, SdtParams* grad) {
  const int depth = params.depth();
  const std::size_t internal = internal_count(depth);
  const std::size_t leaves = leaf_count(depth);
  const std::size_t rows = static_cast<std::size_t>(x.rows());
  if (rows == 0 || static_cast<std::size_t>(targets.size()) != rows) {
    throw DataError("sdt_objective: rows and targets must be non-empty and equal length");
  }
  if (x.cols() != params.w.cols()) throw DataError("sdt_objective: feature count mismatch");
  const Matrix w_eff = effective_filters(params.w, config);

  // z = beta * (x . w_eff + b) for every row and node
  Matrix z = x * w_eff.transpose();
  z.rowwise() += params.b.transpose();
  z *= config.beta;
  const Matrix right = z.unaryExpr([](double v) { return sigmoid(v); });

  Vector q(static_cast<Eigen::Index>(leaves));
  for (std::size_t l = 0; l < leaves; ++l) {
    q[static_cast<Eigen::Index>(l)] = leaf_class1(params.phi(static_cast<Eigen::Index>(l), 0),
                                                  params.phi(static_cast<Eigen::Index>(l), 1));
  }

  Matrix reach(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(internal + leaves));
  std::vector<double> right_row(internal);
  std::vector<double> reach_row(internal + leaves);
  Vector out(static_cast<Eigen::Index>(rows));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    for (std::size_t j = 0; j < internal; ++j) right_row[j] = right(ri, static_cast<Eigen::Index>(j));
    routing_reach(depth, right_row, reach_row);
    double o = 0.0;
    for (std::size_t k = 0; k < internal + leaves; ++k) reach(ri, static_cast<Eigen::Index>(k)) = reach_row[k];
    for (std::size_t l = 0; l < leaves; ++l) o += reach_row[internal + l] * q[static_cast<Eigen::Index>(l)];
    out[ri] = o;
  }

  const double n_rows = static_cast<double>(rows);
  double bce = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    const double p = std::clamp(out[ri], kProbEps, 1.0 - kProbEps);
    bce -= targets[ri] * std::log(p) + (1.0 - targets[ri]) * std::log(1.0 - p);
  }
  double loss = bce / n_rows;

  // balance penalty: -lambda * 2^-level * 0.5 * (log alpha + log(1 - alpha))
  Vector alpha = Vector::Zero(static_cast<Eigen::Index>(internal));
  Vector reach_sum = Vector::Zero(static_cast<Eigen::Index>(internal));
  Vector coeff = Vector::Zero(static_cast<Eigen::Index>(internal));
  if (config.lambda_reg > 0.0) {
    for (std::size_t j = 0; j < internal; ++j) {
      const auto ji = static_cast<Eigen::Index>(j);
      const double s = reach.col(ji).sum();
      reach_sum[ji] = s;
      if (s < 1e-12) continue;
      const double a = std::clamp(right.col(ji).dot(reach.col(ji)) / s, kProbEps, 1.0 - kProbEps);
      alpha[ji] = a;
      const double weight = config.lambda_reg * std::ldexp(1.0, -node_level(j));
      loss -= weight * 0.5 * (std::log(a) + std::log(1.0 - a));
      coeff[ji] = -weight * 0.5 * (1.0 / a - 1.0 / (1.0 - a));
    }
  }
  loss += 0.5 * config.weight_decay * params.w.squaredNorm();
  if (!std::isfinite(loss)) throw NumericalError("sdt_objective: non-finite loss");
  if (grad == nullptr) return loss;

  SdtParams g = SdtParams::zeros(depth, x.cols());
  Matrix g_eff = Matrix::Zero(w_eff.rows(), w_eff.cols());
  std::vector<double> reach_grad(internal + leaves);
  std::vector<double> right_grad(internal);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    const double y = targets[ri];
    const double o = out[ri];
    double d_out = 0.0;
    if (o >= kProbEps && o <= 1.0 - kProbEps) d_out = (-(y / o) + (1.0 - y) / (1.0 - o)) / n_rows;
    for (std::size_t k = 0; k < internal + leaves; ++k) reach_row[k] = reach(ri, static_cast<Eigen::Index>(k));
    for (std::size_t j = 0; j < internal; ++j) {
      const auto ji = static_cast<Eigen::Index>(j);
      right_row[j] = right(ri, ji);
      reach_grad[j] = reach_sum[ji] < 1e-12 ? 0.0 : coeff[ji] * (right_row[j] - alpha[ji]) / reach_sum[ji];
    }
    for (std::size_t l = 0; l < leaves; ++l) {
      const auto li = static_cast<Eigen::Index>(l);
      reach_grad[internal + l] = d_out * q[li];
      const double dq = d_out * reach_row[internal + l] * q[li] * (1.0 - q[li]);
      g.phi(li, 0) -= dq;
      g.phi(li, 1) += dq;
    }
    routing_backward(depth, right_row, reach_row, reach_grad, right_grad);
    for (std::size_t j = 0; j < internal; ++j) {
      const auto ji = static_cast<Eigen::Index>(j);
      double d_right = right_grad[j];
      if (reach_sum[ji] >= 1e-12) d_right += coeff[ji] * reach_row[j] / reach_sum[ji];
      const double dz = config.beta * d_right * right_row[j] * (1.0 - right_row[j]);
      g.b[ji] += dz;
      g_eff.row(ji) += dz * x.row(ri);
    }
  }

  if (config.univariate) {
    for (Eigen::Index j = 0; j < params.w.rows(); ++j) {
      const Vector s = mask_row(params.w, j, config.beta2);
      const Vector gj = g_eff.row(j).transpose();
      const Vector wj = params.w.row(j).transpose();
      const double mixed = (gj.array() * wj.array() * s.array()).sum();
      for (Eigen::Index k = 0; k < wj.size(); ++k) {
        const double sign = wj[k] > 0.0 ? 1.0 : (wj[k] < 0.0 ? -1.0 : 0.0);
        g.w(j, k) = gj[k] * s[k] + config.beta2 * sign * s[k] * (gj[k] * wj[k] - mixed);
      }
    }
  } else {
    g.w = g_eff;
  }
  g.w += config.weight_decay * params.w;
  *grad = std::move(g);
  return loss;
}

TreeModel sdt_tree(const SdtParams& params, const SDTTrainConfig& config) {
  const Matrix w_eff = effective_filters(params.w, config);
  const int depth = params.depth();
  if (!config.univariate) {
    SoftTree tree;
    tree.depth = depth;
    tree.n = params.w.cols();
    tree.filters = config.beta * w_eff;
    tree.biases = config.beta * params.b;
    tree.leaf_logits = params.phi;
    tree.validate();
    return tree;
  }
  UnivariateSoftTree tree;
  tree.depth = depth;
  tree.n = params.w.cols();
  tree.features.resize(static_cast<std::size_t>(params.w.rows()));
  tree.filter_values.resize(params.w.rows());
  for (Eigen::Index j = 0; j < params.w.rows(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < params.w.cols(); ++i) {
      if (std::abs(params.w(j, i)) > std::abs(params.w(j, best))) best = i;
    }
    tree.features[static_cast<std::size_t>(j)] = best;
    tree.filter_values[j] = config.beta * w_eff(j, best);
  }
  tree.biases = config.beta * params.b;
  tree.leaf_logits = params.phi;
  tree.validate();
  return tree;
}

namespace {

Matrix take_rows(const Matrix& x, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = x.row(rows[k]);
  return out;
}

Vector take(const Vector& v, const std::vector<Eigen::Index>& rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[rows[k]];
  return out;
}

}  // namespace

TreeModel sdt_fit(const Matrix& x, const Vector& y_prob, const SDTTrainConfig& config,
                  std::uint64_t seed, SdtHistory* history) {
  config.validate();
  if (x.rows() < 2 || x.cols() == 0) throw DataError("sdt_fit: need at least 2 rows");
  if (y_prob.size() != x.rows()) throw DataError("sdt_fit: target count does not match row count");
  for (Eigen::Index i = 0; i < y_prob.size(); ++i) {
    if (!(y_prob[i] >= 0.0 && y_prob[i] <= 1.0)) throw DataError("sdt_fit: targets must lie in [0,1]");
  }
  const Vector targets = config.round_targets ? round_half_up(y_prob) : y_prob;
  Rng rng(seed);
  const RowSplit split = split_rows(x.rows(), config.valid_fraction, 0.0, rng());
  const Matrix x_valid = take_rows(x, split.valid);
  const Vector y_valid = take(targets, split.valid);

  SdtParams params = SdtParams::zeros(config.depth, x.cols());
  const double bound = std::sqrt(6.0 / static_cast<double>(x.cols() + 1));
  std::uniform_real_distribution<double> init(-bound, bound);
  for (Eigen::Index j = 0; j < params.w.rows(); ++j) {
    for (Eigen::Index i = 0; i < params.w.cols(); ++i) params.w(j, i) = init(rng);
  }

  AdamState adam(AdamConfig{config.learning_rate});
  SdtParams best = params;
  double best_valid = std::numeric_limits<double>::infinity();
  int since_best = 0;
  SdtHistory local;
  std::vector<Eigen::Index> order = split.train;
  const auto batch = static_cast<std::size_t>(config.batch_size);
  SdtParams grad;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::vector<Eigen::Index> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + batch)));
      const double loss = sdt_objective(params, take_rows(x, idx), take(targets, idx), config, &grad);
      epoch_loss += loss * static_cast<double>(idx.size());
      const std::span<double> p_blocks[] = {{params.w.data(), static_cast<std::size_t>(params.w.size())},
                                            {params.b.data(), static_cast<std::size_t>(params.b.size())},
                                            {params.phi.data(), static_cast<std::size_t>(params.phi.size())}};
      const std::span<const double> g_blocks[] = {{grad.w.data(), static_cast<std::size_t>(grad.w.size())},
                                                  {grad.b.data(), static_cast<std::size_t>(grad.b.size())},
                                                  {grad.phi.data(), static_cast<std::size_t>(grad.phi.size())}};
      adam.step(p_blocks, g_blocks);
    }
    local.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    if (split.valid.empty()) {
      best = params;
      local.best_epoch = epoch;
      continue;
    }
    const double valid = sdt_objective(params, x_valid, y_valid, config);
    local.valid_loss.push_back(valid);
    if (valid < best_valid) {
      best_valid = valid;
      best = params;
      local.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  if (history != nullptr) *history = std::move(local);
  return sdt_tree(best, config);
}

}  // namespace inet
