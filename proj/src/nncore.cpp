#include "inet/nncore.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace inet {

namespace {

constexpr std::pair<Activation, std::string_view> kActivationNames[] = {
    {Activation::relu, "relu"},
    {Activation::sigmoid, "sigmoid"},
    {Activation::squeezed_sigmoid, "squeezed_sigmoid"},
    {Activation::softmax, "softmax"},
    {Activation::swish, "swish"},
    {Activation::linear, "linear"},
};

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

std::string_view to_string(Activation kind) {
  for (const auto& [k, name] : kActivationNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

Activation activation_from_string(std::string_view name) {
  for (const auto& [k, n] : kActivationNames) {
    if (n == name) return k;
  }
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

double activate(Activation kind, double x) {
  switch (kind) {
    case Activation::relu:
      return x > 0.0 ? x : 0.0;
    case Activation::sigmoid:
      return sigmoid(x);
    case Activation::squeezed_sigmoid:
      return squeezed_sigmoid(x);
    case Activation::softmax:
      return 1.0;
    case Activation::swish:
      return x * sigmoid(x);
    case Activation::linear:
      return x;
  }
  return x;
}

void activate_rows(Activation kind, const Matrix& pre, Matrix& out) {
  out.resize(pre.rows(), pre.cols());
  if (kind == Activation::softmax) {
    for (Eigen::Index r = 0; r < pre.rows(); ++r) {
      const double peak = pre.row(r).maxCoeff();
      out.row(r) = (pre.row(r).array() - peak).exp();
      out.row(r) /= out.row(r).sum();
    }
    return;
  }
  if (kind == Activation::linear) {
    out = pre;
    return;
  }
  out = pre.unaryExpr([kind](double v) { return activate(kind, v); });
}

Matrix activation_backward(Activation kind, const Matrix& pre, const Matrix& post,
                           const Matrix& upstream) {
  switch (kind) {
    case Activation::linear:
      return upstream;
    case Activation::relu:
      return upstream.array() * (pre.array() > 0.0).cast<double>();
    case Activation::sigmoid:
      return upstream.array() * post.array() * (1.0 - post.array());
    case Activation::squeezed_sigmoid:
      return upstream.array() * 3.0 * post.array() * (1.0 - post.array());
    case Activation::swish: {
      const Eigen::ArrayXXd s = pre.unaryExpr([](double v) { return sigmoid(v); }).array();
      return upstream.array() * (s + pre.array() * s * (1.0 - s));
    }
    case Activation::softmax: {
      Matrix out(upstream.rows(), upstream.cols());
      for (Eigen::Index r = 0; r < upstream.rows(); ++r) {
        const double dot = upstream.row(r).dot(post.row(r));
        out.row(r) = post.row(r).array() * (upstream.row(r).array() - dot);
      }
      return out;
    }
  }
  return upstream;
}

DenseNet::DenseNet(std::vector<Layer> layers) : layers_(std::move(layers)) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& layer = layers_[i];
    if (layer.bias.size() != layer.weight.cols()) {
      throw ConfigError("layer " + std::to_string(i) + ": bias length " +
                        std::to_string(layer.bias.size()) + " != fan_out " +
                        std::to_string(layer.weight.cols()));
    }
    if (i > 0 && layers_[i - 1].weight.cols() != layer.weight.rows()) {
      throw ConfigError("layer " + std::to_string(i) + ": fan_in " +
                        std::to_string(layer.weight.rows()) + " does not chain with fan_out " +
                        std::to_string(layers_[i - 1].weight.cols()));
    }
    if (!(layer.dropout >= 0.0 && layer.dropout < 1.0)) {
      throw ConfigError("layer " + std::to_string(i) + ": dropout must lie in [0,1)");
    }
    if (!all_finite(layer.weight) || !layer.bias.allFinite()) {
      throw NumericalError("layer " + std::to_string(i) + ": non-finite parameters");
    }
  }
}

DenseNet DenseNet::initialized(Eigen::Index input_dim, std::span<const LayerSpec> specs,
                               std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Layer> layers;
  Eigen::Index fan_in = input_dim;
  for (const LayerSpec& spec : specs) {
    if (spec.fan_out < 1) throw ConfigError("layer width must be positive");
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + spec.fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Layer layer;
    layer.weight.resize(fan_in, spec.fan_out);
    // Row-major fill so the draw order matches the flattened layout.
    for (Eigen::Index r = 0; r < fan_in; ++r) {
      for (Eigen::Index c = 0; c < spec.fan_out; ++c) layer.weight(r, c) = dist(rng);
    }
    layer.bias = Vector::Zero(spec.fan_out);
    layer.activation = spec.activation;
    layer.dropout = spec.dropout;
    layers.push_back(std::move(layer));
    fan_in = spec.fan_out;
  }
  return DenseNet(std::move(layers));
}

Eigen::Index DenseNet::input_dim() const {
  return layers_.empty() ? 0 : layers_.front().weight.rows();
}

Eigen::Index DenseNet::output_dim() const {
  return layers_.empty() ? 0 : layers_.back().weight.cols();
}

std::size_t DenseNet::parameter_count() const {
  std::size_t total = 0;
  for (const Layer& layer : layers_) {
    total += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  }
  return total;
}

Matrix DenseNet::forward(const Matrix& batch) const {
  if (layers_.empty()) throw ConfigError("forward on an empty network");
  Matrix current = batch;
  Matrix next;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& layer = layers_[i];
    if (current.cols() != layer.weight.rows()) {
      throw DataError("layer " + std::to_string(i) + ": input has " +
                      std::to_string(current.cols()) + " columns, expected " +
                      std::to_string(layer.weight.rows()));
    }
    Matrix pre = current * layer.weight;
    pre.rowwise() += layer.bias.transpose();
    activate_rows(layer.activation, pre, next);
    current.swap(next);
  }
  return current;
}

Matrix DenseNet::forward(const Matrix& batch, ForwardCache& cache, Rng* dropout_rng) const {
  if (layers_.empty()) throw ConfigError("forward on an empty network");
  cache = ForwardCache{};
  cache.inputs.reserve(layers_.size());
  Matrix current = batch;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& layer = layers_[i];
    if (current.cols() != layer.weight.rows()) {
      throw DataError("layer " + std::to_string(i) + ": input has " +
                      std::to_string(current.cols()) + " columns, expected " +
                      std::to_string(layer.weight.rows()));
    }
    Matrix pre = current * layer.weight;
    pre.rowwise() += layer.bias.transpose();
    Matrix post;
    activate_rows(layer.activation, pre, post);
    Matrix mask;
    Matrix out = post;
    if (dropout_rng != nullptr && layer.dropout > 0.0) {
      const double keep = 1.0 - layer.dropout;
      std::bernoulli_distribution coin(keep);
      mask.resize(post.rows(), post.cols());
      for (Eigen::Index r = 0; r < mask.rows(); ++r) {
        for (Eigen::Index c = 0; c < mask.cols(); ++c) {
          mask(r, c) = coin(*dropout_rng) ? 1.0 / keep : 0.0;
        }
      }
      out = post.cwiseProduct(mask);
    }
    cache.inputs.push_back(std::move(current));
    cache.pre.push_back(std::move(pre));
    cache.post.push_back(std::move(post));
    cache.masks.push_back(std::move(mask));
    current = std::move(out);
  }
  cache.valid = true;
  return current;
}

Gradients DenseNet::backward(const ForwardCache& cache, const Matrix& upstream,
                             Matrix* input_grad) const {
  if (!cache.valid || cache.pre.size() != layers_.size()) {
    throw ConfigError("backward called without a matching forward cache");
  }
  Gradients grads(layers_.size());
  Matrix delta = upstream;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const Layer& layer = layers_[k];
    if (delta.rows() != cache.pre[k].rows() || delta.cols() != cache.pre[k].cols()) {
      throw DataError("layer " + std::to_string(k) + ": upstream gradient shape mismatch");
    }
    if (cache.masks[k].size() > 0) delta = delta.cwiseProduct(cache.masks[k]);
    Matrix dz = activation_backward(layer.activation, cache.pre[k], cache.post[k], delta);
    grads[k].weight = cache.inputs[k].transpose() * dz;
    grads[k].bias = dz.colwise().sum().transpose();
    if (k > 0 || input_grad != nullptr) delta = dz * layer.weight.transpose();
  }
  if (input_grad != nullptr) *input_grad = std::move(delta);
  return grads;
}

Vector DenseNet::flatten() const {
  Vector theta(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index pos = 0;
  for (const Layer& layer : layers_) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) theta[pos++] = layer.weight(r, c);
    }
    theta.segment(pos, layer.bias.size()) = layer.bias;
    pos += layer.bias.size();
  }
  return theta;
}

void DenseNet::assign_flat(const Vector& theta) {
  if (theta.size() != static_cast<Eigen::Index>(parameter_count())) {
    throw DataError("flat parameter vector has length " + std::to_string(theta.size()) +
                    ", network expects " + std::to_string(parameter_count()));
  }
  Eigen::Index pos = 0;
  for (Layer& layer : layers_) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = theta[pos++];
    }
    layer.bias = theta.segment(pos, layer.bias.size());
    pos += layer.bias.size();
  }
}

std::vector<std::span<double>> DenseNet::parameter_blocks() {
  std::vector<std::span<double>> blocks;
  for (Layer& layer : layers_) {
    blocks.emplace_back(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
    blocks.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
  }
  return blocks;
}

std::vector<std::span<const double>> gradient_blocks(const Gradients& grads) {
  std::vector<std::span<const double>> blocks;
  for (const LayerGradient& g : grads) {
    blocks.emplace_back(g.weight.data(), static_cast<std::size_t>(g.weight.size()));
    blocks.emplace_back(g.bias.data(), static_cast<std::size_t>(g.bias.size()));
  }
  return blocks;
}

Gradients zero_gradients(const DenseNet& net) {
  Gradients grads;
  for (const Layer& layer : net.layers()) {
    grads.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()),
                     Vector::Zero(layer.bias.size())});
  }
  return grads;
}

void AdamState::step(std::span<const std::span<double>> params,
                     std::span<const std::span<const double>> grads) {
  if (params.size() != grads.size()) {
    throw DataError("adam: " + std::to_string(params.size()) + " parameter blocks but " +
                    std::to_string(grads.size()) + " gradient blocks");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size()) {
      throw DataError("adam: block " + std::to_string(b) + " shape mismatch");
    }
    for (double g : grads[b]) {
      if (!std::isfinite(g)) {
        throw NumericalError("adam: non-finite gradient in parameter block " +
                             std::to_string(b));
      }
    }
  }
  if (first_.empty()) {
    for (const auto& block : params) {
      first_.push_back(Vector::Zero(static_cast<Eigen::Index>(block.size())));
      second_.push_back(Vector::Zero(static_cast<Eigen::Index>(block.size())));
    }
  } else if (first_.size() != params.size()) {
    throw DataError("adam: parameter block layout changed between steps");
  }
  ++steps_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t b = 0; b < params.size(); ++b) {
    Vector& m = first_[b];
    Vector& v = second_[b];
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const double g = grads[b][i];
      const auto k = static_cast<Eigen::Index>(i);
      m[k] = b1 * m[k] + (1.0 - b1) * g;
      v[k] = b2 * v[k] + (1.0 - b2) * g * g;
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      params[b][i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

void adam_step(AdamState& state, DenseNet& net, const Gradients& grads) {
  auto params = net.parameter_blocks();
  auto g = gradient_blocks(grads);
  state.step(params, g);
}

double bce_loss(const Vector& probs, const Vector& targets, Vector* grad) {
  if (probs.size() != targets.size() || probs.size() == 0) {
    throw DataError("bce: probabilities and targets must be non-empty and equal length");
  }
  const double count = static_cast<double>(probs.size());
  double total = 0.0;
  if (grad != nullptr) grad->resize(probs.size());
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const double raw = probs[i];
    const double p = std::clamp(raw, kProbEps, 1.0 - kProbEps);
    const double y = targets[i];
    total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    if (grad != nullptr) {
      const bool clamped = raw < kProbEps || raw > 1.0 - kProbEps;
      (*grad)[i] = clamped ? 0.0 : (-(y / p) + (1.0 - y) / (1.0 - p)) / count;
    }
  }
  const double loss = total / count;
  if (!std::isfinite(loss)) throw NumericalError("bce: non-finite loss");
  return loss;
}

nlohmann::json densenet_to_json(const DenseNet& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const Layer& layer : net.layers()) {
    std::vector<double> weight;
    weight.reserve(static_cast<std::size_t>(layer.weight.size()));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) weight.push_back(layer.weight(r, c));
    }
    layers.push_back({
        {"fan_in", layer.weight.rows()},
        {"fan_out", layer.weight.cols()},
        {"activation", to_string(layer.activation)},
        {"dropout", layer.dropout},
        {"weight", weight},
        {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())},
    });
  }
  return {{"format_version", kModelFormatVersion}, {"layers", layers}};
}

DenseNet densenet_from_json(const nlohmann::json& doc) {
  if (!doc.contains("format_version")) throw ConfigError("model: missing format_version");
  if (doc.at("format_version").get<int>() != kModelFormatVersion) {
    throw ConfigError("model: unsupported format_version " + doc.at("format_version").dump());
  }
  std::vector<Layer> layers;
  std::size_t index = 0;
  for (const auto& entry : doc.at("layers")) {
    const auto fan_in = entry.at("fan_in").get<Eigen::Index>();
    const auto fan_out = entry.at("fan_out").get<Eigen::Index>();
    const auto weight = entry.at("weight").get<std::vector<double>>();
    const auto bias = entry.at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(weight.size()) != fan_in * fan_out ||
        static_cast<Eigen::Index>(bias.size()) != fan_out) {
      throw ConfigError("model: layer " + std::to_string(index) +
                        " parameter arrays do not match its shape");
    }
    Layer layer;
    layer.weight.resize(fan_in, fan_out);
    for (Eigen::Index r = 0; r < fan_in; ++r) {
      for (Eigen::Index c = 0; c < fan_out; ++c) {
        layer.weight(r, c) = weight[static_cast<std::size_t>(r * fan_out + c)];
      }
    }
    layer.bias = Eigen::Map<const Vector>(bias.data(), fan_out);
    layer.activation = activation_from_string(entry.at("activation").get<std::string>());
    layer.dropout = entry.value("dropout", 0.0);
    layers.push_back(std::move(layer));
    ++index;
  }
  return DenseNet(std::move(layers));
}

}  // namespace inet
