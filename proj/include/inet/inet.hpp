#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "inet/lambdanet.hpp"
#include "inet/nncore.hpp"
#include "inet/trees.hpp"

namespace inet {

struct INetArchitecture {
  std::vector<Eigen::Index> hidden;
  Activation activation = Activation::sigmoid;
  std::vector<double> dropout;  // one rate per hidden layer
};

/// Tuned trunks per family:
///   standard_dt    [1792, 512, 512] sigmoid, dropout [0, 0, 0.5]
///   univariate_sdt [4096, 2048]     swish,   dropout [0, 0.5]
///   standard_sdt   [1792, 512, 512] swish,   dropout [0.3, 0.3, 0.3]
INetArchitecture preset_architecture(TreeFamily family);

struct INetTrainConfig {
  INetArchitecture architecture;
  int depth = 3;
  int batch_size = 256;
  double learning_rate = 1e-3;
  int epochs = 500;
  int patience = 25;
  std::size_t loss_rows = 0;  // rows per entry per epoch; 0 = every row of the entry's dataset
  double gamma = kDefaultGamma;
  bool standardize_input = true;  // z-score theta_lambda with train-split statistics

  void validate() const;
};

INetTrainConfig default_inet_config(TreeFamily family);
nlohmann::json to_json(const INetTrainConfig& config);
INetTrainConfig inet_config_from_json(const nlohmann::json& doc, TreeFamily family);

/// Contiguous run of head outputs sharing an activation. Softmax runs are normalized
/// in groups of `group` outputs (one group per internal node).
struct HeadSegment {
  std::size_t offset = 0;
  std::size_t length = 0;
  Activation activation = Activation::linear;
  std::size_t group = 1;
};

std::vector<HeadSegment> head_segments(const ThetaLayout& layout);

/// Row-wise head activation of raw trunk outputs.
Matrix apply_head(const std::vector<HeadSegment>& head, const Matrix& raw);
/// dL/d(raw) from dL/d(activated).
Matrix head_backward(const std::vector<HeadSegment>& head, const Matrix& activated,
                     const Matrix& upstream);

struct INetModel {
  DenseNet trunk;  // theta_lambda -> raw head outputs (linear last layer)
  TreeFamily family = TreeFamily::standard_dt;
  ThetaLayout layout;
  std::vector<HeadSegment> head;
  Eigen::Index lambda_hidden = 128;
  double gamma = kDefaultGamma;
  // Per-coordinate input shift and scale; both empty when inputs are used as given.
  Vector input_mean;
  Vector input_scale;

  Eigen::Index n() const { return layout.n; }
  int depth() const { return layout.depth; }
};

/// Untrained model whose input width is the flattened lambda architecture (128n + 257).
INetModel build_inet(TreeFamily family, Eigen::Index n, int depth, const INetTrainConfig& config,
                     std::uint64_t seed, Eigen::Index lambda_hidden = 128);

/// theta_lambda rows as the trunk sees them.
Matrix trunk_input(const INetModel& model, const Matrix& theta_lambda);

/// Head-activated tree parameters for a batch of theta_lambda rows.
Matrix predict_theta_g(const INetModel& model, const Matrix& theta_lambda);

/// Mean binary cross-entropy between {0,1} targets and the soft tree output on the rows
/// of x; tree outputs are clamped to [1e-7, 1 - 1e-7] before the logarithms. When grad is
/// non-empty, adds scale * dLoss/d(theta_g) into it.
double tree_bce(std::span<const double> theta_g, const ThetaLayout& layout, const Matrix& x,
                const Vector& targets, const SoftEvalOptions& options,
                std::span<double> grad = {}, double scale = 1.0);

/// Fidelity loss of predicted tree parameters against round(lambda(x)) over the rows of x.
double inet_loss(std::span<const double> theta_g, const ThetaLayout& layout,
                 const LambdaNet& lambda, const Matrix& x, double gamma = kDefaultGamma);

/// One loss term of a batch: an entry's rows and their rounded network predictions.
struct LossRows {
  const Matrix* x = nullptr;
  const Vector* targets = nullptr;
};

/// Mean loss over a batch of theta_lambda rows. Fills trunk gradients when grads is non-null;
/// dropout is active only when dropout_rng is non-null.
double inet_batch_loss(const INetModel& model, const Matrix& theta_lambda,
                       std::span<const LossRows> rows, Gradients* grads, Rng* dropout_rng);

struct INetHistory {
  std::vector<double> train_loss;
  std::vector<double> valid_loss;
  int best_epoch = -1;
  double initial_valid_loss = 0.0;
};

/// Minimizes the mean fidelity loss over the train split with Adam, early-stopping on the
/// valid split and restoring the best parameters.
INetModel train_inet(const LambdaCorpus& corpus, TreeFamily family, const INetTrainConfig& config,
                     std::uint64_t seed, INetHistory* history = nullptr);

/// Mean loss of a model over one corpus split, every row of every entry.
double corpus_loss(const INetModel& model, const LambdaCorpus& corpus, CorpusSplit split);

/// Single forward pass, head activation and decode.
TreeModel interpret(const INetModel& model, const Vector& theta_lambda);

nlohmann::json inet_to_json(const INetModel& model);
INetModel inet_from_json(const nlohmann::json& doc);
void save_inet(const INetModel& model, const std::filesystem::path& path);
INetModel load_inet(const std::filesystem::path& path);

}  // namespace inet
