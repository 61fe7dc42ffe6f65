#include "inet/inet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "inet/csv.hpp"

namespace inet {

INetArchitecture preset_architecture(TreeFamily family) {
  switch (family) {
    case TreeFamily::standard_dt:
      return {{1792, 512, 512}, Activation::sigmoid, {0.0, 0.0, 0.5}};
    case TreeFamily::univariate_sdt:
      return {{4096, 2048}, Activation::swish, {0.0, 0.5}};
    case TreeFamily::standard_sdt:
      return {{1792, 512, 512}, Activation::swish, {0.3, 0.3, 0.3}};
  }
  throw ConfigError("preset_architecture: unknown family");
}

void INetTrainConfig::validate() const {
  if (architecture.hidden.empty()) throw ConfigError("inet.hidden: at least one hidden layer required");
  if (architecture.dropout.size() != architecture.hidden.size()) {
    throw ConfigError("inet.dropout: length must equal the hidden layer count");
  }
  for (double d : architecture.dropout) {
    if (!(d >= 0.0 && d < 1.0)) throw ConfigError("inet.dropout: rates must lie in [0,1)");
  }
  for (Eigen::Index h : architecture.hidden) {
    if (h < 1) throw ConfigError("inet.hidden: widths must be positive");
  }
  if (depth < 1) throw ConfigError("inet.depth: must be at least 1");
  if (batch_size < 1) throw ConfigError("inet.batch_size: must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("inet.learning_rate: must be positive");
  if (epochs < 1) throw ConfigError("inet.epochs: must be at least 1");
  if (patience < 1) throw ConfigError("inet.patience: must be at least 1");
  if (!(gamma > 0.0)) throw ConfigError("inet.gamma: must be positive");
}

INetTrainConfig default_inet_config(TreeFamily family) {
  INetTrainConfig config;
  config.architecture = preset_architecture(family);
  return config;
}

nlohmann::json to_json(const INetTrainConfig& c) {
  return {{"hidden", c.architecture.hidden},
          {"activation", to_string(c.architecture.activation)},
          {"dropout", c.architecture.dropout},
          {"depth", c.depth},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"patience", c.patience},
          {"loss_rows", c.loss_rows},
          {"gamma", c.gamma},
          {"standardize_input", c.standardize_input}};
}

INetTrainConfig inet_config_from_json(const nlohmann::json& doc, TreeFamily family) {
  INetTrainConfig c = default_inet_config(family);
  if (doc.contains("hidden")) c.architecture.hidden = doc.at("hidden").get<std::vector<Eigen::Index>>();
  if (doc.contains("activation")) {
    c.architecture.activation = activation_from_string(doc.at("activation").get<std::string>());
  }
  if (doc.contains("dropout")) c.architecture.dropout = doc.at("dropout").get<std::vector<double>>();
  c.depth = doc.value("depth", c.depth);
  c.batch_size = doc.value("batch_size", c.batch_size);
  c.learning_rate = doc.value("learning_rate", c.learning_rate);
  c.epochs = doc.value("epochs", c.epochs);
  c.patience = doc.value("patience", c.patience);
  c.loss_rows = doc.value("loss_rows", c.loss_rows);
  c.gamma = doc.value("gamma", c.gamma);
  c.standardize_input = doc.value("standardize_input", c.standardize_input);
  c.validate();
  return c;
}

std::vector<HeadSegment> head_segments(const ThetaLayout& layout) {
  const std::size_t internal = layout.internal_nodes();
  const std::size_t leaves = layout.leaf_nodes();
  const auto n = static_cast<std::size_t>(layout.n);
  switch (layout.family) {
    case TreeFamily::standard_dt:
      return {{layout.identifiers, internal * n, Activation::softmax, n},
              {layout.splits, internal * n, Activation::squeezed_sigmoid, 1},
              {layout.leaves, leaves, Activation::sigmoid, 1}};
    case TreeFamily::univariate_sdt:
      return {{layout.identifiers, internal * n, Activation::softmax, n},
              {layout.filters, internal * n, Activation::linear, 1},
              {layout.biases, internal, Activation::linear, 1},
              {layout.leaves, 2 * leaves, Activation::linear, 1}};
    case TreeFamily::standard_sdt:
      return {{layout.filters, internal * n, Activation::linear, 1},
              {layout.biases, internal, Activation::linear, 1},
              {layout.leaves, 2 * leaves, Activation::linear, 1}};
  }
  throw ConfigError("head_segments: unknown family");
}

Matrix apply_head(const std::vector<HeadSegment>& head, const Matrix& raw) {
  Matrix out = raw;
  for (const HeadSegment& seg : head) {
    const auto off = static_cast<Eigen::Index>(seg.offset);
    const auto len = static_cast<Eigen::Index>(seg.length);
    if (seg.activation == Activation::softmax) {
      const auto group = static_cast<Eigen::Index>(seg.group);
      for (Eigen::Index g = off; g < off + len; g += group) {
        Matrix block = raw.middleCols(g, group);
        Matrix activated;
        activate_rows(Activation::softmax, block, activated);
        out.middleCols(g, group) = activated;
      }
    } else if (seg.activation != Activation::linear) {
      const Activation kind = seg.activation;
      out.middleCols(off, len) = raw.middleCols(off, len).unaryExpr([kind](double v) { return activate(kind, v); });
    }
  }
  return out;
}

Matrix head_backward(const std::vector<HeadSegment>& head, const Matrix& activated,
                     const Matrix& upstream) {
  Matrix out = upstream;
  for (const HeadSegment& seg : head) {
    const auto off = static_cast<Eigen::Index>(seg.offset);
    const auto len = static_cast<Eigen::Index>(seg.length);
    switch (seg.activation) {
      case Activation::softmax: {
        const auto group = static_cast<Eigen::Index>(seg.group);
        for (Eigen::Index g = off; g < off + len; g += group) {
          for (Eigen::Index r = 0; r < out.rows(); ++r) {
            const auto a = activated.row(r).segment(g, group);
            const auto u = upstream.row(r).segment(g, group);
            const double dot = u.dot(a);
            out.row(r).segment(g, group) = a.array() * (u.array() - dot);
          }
        }
        break;
      }
      case Activation::squeezed_sigmoid: {
        const auto a = activated.middleCols(off, len).array();
        out.middleCols(off, len) = upstream.middleCols(off, len).array() * 3.0 * a * (1.0 - a);
        break;
      }
      case Activation::sigmoid: {
        const auto a = activated.middleCols(off, len).array();
        out.middleCols(off, len) = upstream.middleCols(off, len).array() * a * (1.0 - a);
        break;
      }
      case Activation::linear:
        break;
      default:
        throw ConfigError("head_backward: unsupported head activation");
    }
  }
  return out;
}

INetModel build_inet(TreeFamily family, Eigen::Index n, int depth, const INetTrainConfig& config,
                     std::uint64_t seed, Eigen::Index lambda_hidden) {
  config.validate();
  INetModel model;
  model.family = family;
  model.layout = ThetaLayout::make(family, n, depth);
  model.head = head_segments(model.layout);
  model.lambda_hidden = lambda_hidden;
  model.gamma = config.gamma;
  std::vector<LayerSpec> specs;
  for (std::size_t i = 0; i < config.architecture.hidden.size(); ++i) {
    specs.push_back({config.architecture.hidden[i], config.architecture.activation,
                     config.architecture.dropout[i]});
  }
  specs.push_back({static_cast<Eigen::Index>(model.layout.total), Activation::linear, 0.0});
  const auto input = static_cast<Eigen::Index>(lambda_theta_size(n, lambda_hidden));
  model.trunk = DenseNet::initialized(input, specs, seed);
  return model;
}

Matrix trunk_input(const INetModel& model, const Matrix& theta_lambda) {
  if (model.input_mean.size() == 0) return theta_lambda;
  if (theta_lambda.cols() != model.input_mean.size()) {
    throw DataError("trunk_input: theta has " + std::to_string(theta_lambda.cols()) + " columns, model expects " +
                    std::to_string(model.input_mean.size()));
  }
  return (theta_lambda.rowwise() - model.input_mean.transpose()).array().rowwise() /
         model.input_scale.transpose().array();
}

Matrix predict_theta_g(const INetModel& model, const Matrix& theta_lambda) {
  return apply_head(model.head, model.trunk.forward(trunk_input(model, theta_lambda)));
}

double tree_bce(std::span<const double> theta_g, const ThetaLayout& layout, const Matrix& x,
                const Vector& targets, const SoftEvalOptions& options, std::span<double> grad,
                double scale) {
  if (x.rows() != targets.size() || x.rows() == 0) {
    throw DataError("tree_bce: rows and targets must be non-empty and equal length");
  }
  const auto rows = static_cast<double>(x.rows());
  const bool want_grad = !grad.empty();
  std::vector<double> row(static_cast<std::size_t>(x.cols()));
  std::vector<double> local(want_grad ? theta_g.size() : 0);
  double total = 0.0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) row[static_cast<std::size_t>(c)] = x(r, c);
    if (want_grad) std::fill(local.begin(), local.end(), 0.0);
    const double g = eval_theta_soft(theta_g, layout, row, options, local, 1.0);
    const double p = std::clamp(g, kProbEps, 1.0 - kProbEps);
    const double y = targets[r];
    total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    if (want_grad && g >= kProbEps && g <= 1.0 - kProbEps) {
      const double coeff = scale * (-(y / p) + (1.0 - y) / (1.0 - p)) / rows;
      for (std::size_t k = 0; k < local.size(); ++k) grad[k] += coeff * local[k];
    }
  }
  const double loss = total / rows;
  if (!std::isfinite(loss)) throw NumericalError("tree_bce: non-finite loss");
  return loss;
}

double inet_loss(std::span<const double> theta_g, const ThetaLayout& layout,
                 const LambdaNet& lambda, const Matrix& x, double gamma) {
  const Vector targets = round_half_up(predict_lambda(lambda, x));
  return tree_bce(theta_g, layout, x, targets, SoftEvalOptions{gamma});
}

double inet_batch_loss(const INetModel& model, const Matrix& theta_lambda,
                       std::span<const LossRows> rows, Gradients* grads, Rng* dropout_rng) {
  if (static_cast<std::size_t>(theta_lambda.rows()) != rows.size() || rows.empty()) {
    throw DataError("inet_batch_loss: one row set per theta_lambda row required");
  }
  ForwardCache cache;
  const bool train = grads != nullptr || dropout_rng != nullptr;
  const Matrix input = trunk_input(model, theta_lambda);
  const Matrix raw = train ? model.trunk.forward(input, cache, dropout_rng) : model.trunk.forward(input);
  const Matrix activated = apply_head(model.head, raw);
  const auto batch = static_cast<double>(rows.size());
  const SoftEvalOptions options{model.gamma};
  Matrix upstream;
  if (grads != nullptr) upstream = Matrix::Zero(activated.rows(), activated.cols());
  double total = 0.0;
  std::vector<double> theta_g(static_cast<std::size_t>(activated.cols()));
  std::vector<double> grad_row(grads != nullptr ? theta_g.size() : 0);
  for (std::size_t b = 0; b < rows.size(); ++b) {
    const auto bi = static_cast<Eigen::Index>(b);
    for (Eigen::Index k = 0; k < activated.cols(); ++k) theta_g[static_cast<std::size_t>(k)] = activated(bi, k);
    if (grads != nullptr) std::fill(grad_row.begin(), grad_row.end(), 0.0);
    total += tree_bce(theta_g, model.layout, *rows[b].x, *rows[b].targets, options, grad_row,
                      1.0 / batch);
    if (grads != nullptr) {
      for (Eigen::Index k = 0; k < activated.cols(); ++k) upstream(bi, k) = grad_row[static_cast<std::size_t>(k)];
    }
  }
  if (grads != nullptr) *grads = model.trunk.backward(cache, head_backward(model.head, activated, upstream));
  return total / batch;
}

namespace {

struct PreparedEntry {
  const CorpusEntry* entry = nullptr;
  Vector targets;  // round(lambda(x)) on every dataset row
};

std::vector<PreparedEntry> prepare(const std::vector<const CorpusEntry*>& entries) {
  std::vector<PreparedEntry> out;
  out.reserve(entries.size());
  for (const CorpusEntry* e : entries) {
    out.push_back({e, round_half_up(predict_lambda(e->lambda, e->dataset.features))});
  }
  return out;
}

Matrix theta_matrix(const std::vector<PreparedEntry>& entries, std::span<const std::size_t> order) {
  Matrix out(static_cast<Eigen::Index>(order.size()), entries.front().entry->lambda.theta.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = entries[order[i]].entry->lambda.theta.transpose();
  }
  return out;
}

Matrix theta_matrix_all(const std::vector<PreparedEntry>& entries) {
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  return theta_matrix(entries, order);
}

double mean_loss(const INetModel& model, const std::vector<PreparedEntry>& entries, int batch_size) {
  double total = 0.0;
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    const std::span<const std::size_t> idx(order.data() + start, stop - start);
    std::vector<LossRows> rows;
    for (std::size_t i : idx) rows.push_back({&entries[i].entry->dataset.features, &entries[i].targets});
    total += inet_batch_loss(model, theta_matrix(entries, idx), rows, nullptr, nullptr) *
             static_cast<double>(idx.size());
  }
  return total / static_cast<double>(entries.size());
}

}  // namespace

INetModel train_inet(const LambdaCorpus& corpus, TreeFamily family, const INetTrainConfig& config,
                     std::uint64_t seed, INetHistory* history) {
  config.validate();
  const auto train_entries = prepare(corpus.split(CorpusSplit::train));
  const auto valid_entries = prepare(corpus.split(CorpusSplit::valid));
  if (train_entries.size() < 2 || valid_entries.size() < 2) {
    throw DataError("train_inet: corpus needs at least 2 train and 2 valid entries");
  }
  Rng rng(seed);
  INetModel model = build_inet(family, corpus.spec.n, config.depth, config, rng(),
                               corpus.spec.lambda.hidden);
  for (const auto* part : {&train_entries, &valid_entries}) {
    for (const auto& e : *part) {
      if (e.entry->lambda.theta.size() != model.trunk.input_dim()) {
        throw DataError("train_inet: entry " + e.entry->id + " has an incompatible theta length");
      }
    }
  }
  if (config.standardize_input) {
    const Matrix all = theta_matrix_all(train_entries);
    model.input_mean = all.colwise().mean().transpose();
    const Vector sd = ((all.rowwise() - model.input_mean.transpose()).colwise().squaredNorm() /
                       static_cast<double>(all.rows()))
                          .cwiseSqrt()
                          .transpose();
    // coordinates that never vary pass through unscaled
    model.input_scale = sd.unaryExpr([](double v) { return v > 1e-12 ? v : 1.0; });
  }
  AdamState adam(AdamConfig{config.learning_rate});
  double best = mean_loss(model, valid_entries, config.batch_size);
  Vector best_params = model.trunk.flatten();
  INetHistory local;
  local.initial_valid_loss = best;
  int since_best = 0;

  std::vector<std::size_t> order(train_entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Matrix> sub_x;
  std::vector<Vector> sub_y;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      std::vector<LossRows> rows;
      sub_x.assign(idx.size(), Matrix{});
      sub_y.assign(idx.size(), Vector{});
      for (std::size_t b = 0; b < idx.size(); ++b) {
        const PreparedEntry& e = train_entries[idx[b]];
        const Matrix& x = e.entry->dataset.features;
        if (config.loss_rows == 0 || config.loss_rows >= static_cast<std::size_t>(x.rows())) {
          rows.push_back({&x, &e.targets});
          continue;
        }
        std::vector<Eigen::Index> pick(static_cast<std::size_t>(x.rows()));
        std::iota(pick.begin(), pick.end(), Eigen::Index{0});
        std::shuffle(pick.begin(), pick.end(), rng);
        sub_x[b].resize(static_cast<Eigen::Index>(config.loss_rows), x.cols());
        sub_y[b].resize(static_cast<Eigen::Index>(config.loss_rows));
        for (std::size_t r = 0; r < config.loss_rows; ++r) {
          sub_x[b].row(static_cast<Eigen::Index>(r)) = x.row(pick[r]);
          sub_y[b][static_cast<Eigen::Index>(r)] = e.targets[pick[r]];
        }
        rows.push_back({&sub_x[b], &sub_y[b]});
      }
      Gradients grads;
      const double loss = inet_batch_loss(model, theta_matrix(train_entries, idx), rows, &grads, &rng);
      if (!std::isfinite(loss)) {
        throw NumericalError("train_inet: non-finite loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += loss * static_cast<double>(idx.size());
      adam_step(adam, model.trunk, grads);
    }
    const double valid = mean_loss(model, valid_entries, config.batch_size);
    local.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    local.valid_loss.push_back(valid);
    if (valid < best) {
      best = valid;
      best_params = model.trunk.flatten();
      local.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  model.trunk.assign_flat(best_params);
  if (history != nullptr) *history = std::move(local);
  return model;
}

double corpus_loss(const INetModel& model, const LambdaCorpus& corpus, CorpusSplit split) {
  const auto entries = prepare(corpus.split(split));
  if (entries.empty()) throw DataError("corpus_loss: split is empty");
  return mean_loss(model, entries, 256);
}

TreeModel interpret(const INetModel& model, const Vector& theta_lambda) {
  if (theta_lambda.size() != model.trunk.input_dim()) {
    throw DataError("interpret: theta has length " + std::to_string(theta_lambda.size()) +
                    ", model expects " + std::to_string(model.trunk.input_dim()));
  }
  const Matrix theta_g = predict_theta_g(model, theta_lambda.transpose());
  const std::vector<double> flat(theta_g.data(), theta_g.data() + theta_g.size());
  return decode(flat, model.layout);
}

nlohmann::json inet_to_json(const INetModel& model) {
  nlohmann::json segments = nlohmann::json::array();
  for (const HeadSegment& s : model.head) {
    segments.push_back({{"offset", s.offset},
                        {"length", s.length},
                        {"activation", to_string(s.activation)},
                        {"group", s.group}});
  }
  const ThetaLayout& l = model.layout;
  auto offset = [](std::size_t v) -> nlohmann::json {
    return v == ThetaLayout::kAbsent ? nlohmann::json(nullptr) : nlohmann::json(v);
  };
  nlohmann::json head = {
      {"family", to_string(model.family)},
      {"n", l.n},
      {"depth", l.depth},
      {"lambda_hidden", model.lambda_hidden},
      {"gamma", model.gamma},
      {"total", l.total},
      {"offsets",
       {{"identifiers", offset(l.identifiers)},
        {"splits", offset(l.splits)},
        {"filters", offset(l.filters)},
        {"biases", offset(l.biases)},
        {"leaves", offset(l.leaves)}}},
      {"segments", segments},
  };
  nlohmann::json doc = {{"format_version", kModelFormatVersion}, {"head", head}, {"trunk", densenet_to_json(model.trunk)}};
  if (model.input_mean.size() > 0) {
    doc["input"] = {{"mean", std::vector<double>(model.input_mean.begin(), model.input_mean.end())},
                    {"scale", std::vector<double>(model.input_scale.begin(), model.input_scale.end())}};
  }
  return doc;
}

INetModel inet_from_json(const nlohmann::json& doc) {
  if (doc.value("format_version", 0) != kModelFormatVersion) {
    throw ConfigError("inet model: unsupported or missing format_version");
  }
  const auto& head = doc.at("head");
  INetModel model;
  model.family = family_from_string(head.at("family").get<std::string>());
  model.layout = ThetaLayout::make(model.family, head.at("n").get<Eigen::Index>(), head.at("depth").get<int>());
  model.head = head_segments(model.layout);
  if (head.contains("total") && head.at("total").get<std::size_t>() != model.layout.total) {
    throw ConfigError("inet model: head.total does not match the family layout");
  }
  model.lambda_hidden = head.value("lambda_hidden", Eigen::Index{128});
  model.gamma = head.value("gamma", kDefaultGamma);
  model.trunk = densenet_from_json(doc.at("trunk"));
  if (model.trunk.output_dim() != static_cast<Eigen::Index>(model.layout.total)) {
    throw ConfigError("inet model: trunk output width does not match the head layout");
  }
  if (model.trunk.input_dim() != static_cast<Eigen::Index>(lambda_theta_size(model.layout.n, model.lambda_hidden))) {
    throw ConfigError("inet model: trunk input width does not match the lambda architecture");
  }
  if (doc.contains("input")) {
    const auto mean = doc.at("input").at("mean").get<std::vector<double>>();
    const auto scale = doc.at("input").at("scale").get<std::vector<double>>();
    if (mean.size() != scale.size() || static_cast<Eigen::Index>(mean.size()) != model.trunk.input_dim()) {
      throw ConfigError("inet model: input statistics do not match the trunk width");
    }
    for (double v : scale) {
      if (!(v > 0.0)) throw ConfigError("inet model: input scale must be positive");
    }
    model.input_mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    model.input_scale = Eigen::Map<const Vector>(scale.data(), static_cast<Eigen::Index>(scale.size()));
  }
  return model;
}

void save_inet(const INetModel& model, const std::filesystem::path& path) {
  write_text_file(path, inet_to_json(model).dump() + "\n");
}

INetModel load_inet(const std::filesystem::path& path) {
  return inet_from_json(nlohmann::json::parse(read_text_file(path)));
}

}  // namespace inet
