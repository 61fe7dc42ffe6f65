#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "inet/common.hpp"
#include "json.hpp"

namespace inet {

enum class Activation { relu, sigmoid, squeezed_sigmoid, softmax, swish, linear };

std::string_view to_string(Activation kind);
Activation activation_from_string(std::string_view name);

/// Scalar activation. A softmax over a single value is 1.
double activate(Activation kind, double x);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// squeezed_sigmoid(x) = 1 / (1 + e^(-3x))
inline double squeezed_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-3.0 * x)); }

/// Row-wise activation of a pre-activation matrix (softmax normalizes each row).
void activate_rows(Activation kind, const Matrix& pre, Matrix& out);

/// Maps dL/d(activated) to dL/d(pre-activation), row by row.
Matrix activation_backward(Activation kind, const Matrix& pre, const Matrix& post,
                           const Matrix& upstream);

struct LayerSpec {
  Eigen::Index fan_out = 0;
  Activation activation = Activation::linear;
  double dropout = 0.0;
};

struct Layer {
  Matrix weight;  // fan_in x fan_out
  Vector bias;    // fan_out
  Activation activation = Activation::linear;
  double dropout = 0.0;  // applied to this layer's output at train time
};

struct LayerGradient {
  Matrix weight;
  Vector bias;
};
using Gradients = std::vector<LayerGradient>;

/// Intermediate values kept by a training-mode forward pass.
struct ForwardCache {
  std::vector<Matrix> inputs;  // input of each layer
  std::vector<Matrix> pre;     // pre-activations
  std::vector<Matrix> post;    // activations before dropout
  std::vector<Matrix> masks;   // inverted-dropout masks; empty when unused
  bool valid = false;
};

class DenseNet {
 public:
  DenseNet() = default;
  explicit DenseNet(std::vector<Layer> layers);

  /// Fan-based uniform initialization in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static DenseNet initialized(Eigen::Index input_dim, std::span<const LayerSpec> specs,
                              std::uint64_t seed);

  /// Inference pass; dropout is a no-op.
  Matrix forward(const Matrix& batch) const;

  /// Training pass. Dropout is applied only when dropout_rng is non-null.
  Matrix forward(const Matrix& batch, ForwardCache& cache, Rng* dropout_rng) const;

  /// Parameter gradients for the batch cached by the last training forward pass.
  /// Returns dL/d(input) as well when input_grad is non-null.
  Gradients backward(const ForwardCache& cache, const Matrix& upstream,
                     Matrix* input_grad = nullptr) const;

  Eigen::Index input_dim() const;
  Eigen::Index output_dim() const;
  std::size_t parameter_count() const;
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& mutable_layers() { return layers_; }

  /// Weight (row-major) then bias, layer by layer.
  Vector flatten() const;
  void assign_flat(const Vector& theta);

  std::vector<std::span<double>> parameter_blocks();

 private:
  std::vector<Layer> layers_;
};

std::vector<std::span<const double>> gradient_blocks(const Gradients& grads);

/// Gradients with every entry zero and shapes matching net.
Gradients zero_gradients(const DenseNet& net);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

/// Bias-corrected Adam over a fixed list of parameter blocks.
class AdamState {
 public:
  explicit AdamState(AdamConfig config = {}) : config_(config) {}

  void step(std::span<const std::span<double>> params,
            std::span<const std::span<const double>> grads);

  long long steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<Vector> first_;
  std::vector<Vector> second_;
  long long steps_ = 0;
};

void adam_step(AdamState& state, DenseNet& net, const Gradients& grads);

/// Mean binary cross-entropy of probabilities against {0,1} targets, with probabilities
/// clamped to [kProbEps, 1 - kProbEps]. Writes dL/d(prob) into grad when non-null.
double bce_loss(const Vector& probs, const Vector& targets, Vector* grad = nullptr);

nlohmann::json densenet_to_json(const DenseNet& net);
DenseNet densenet_from_json(const nlohmann::json& doc);

inline constexpr int kModelFormatVersion = 1;

}  // namespace inet
