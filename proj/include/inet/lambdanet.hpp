#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "inet/datagen.hpp"
#include "inet/nncore.hpp"

namespace inet {

/// Training setup of the networks being interpreted: n -> 128 relu -> 1 sigmoid,
/// Adam at 1e-3, binary cross-entropy, batch 64, up to 1000 epochs with early stopping.
struct LambdaConfig {
  Eigen::Index hidden = 128;
  double learning_rate = 1e-3;
  int epochs = 1000;
  int batch_size = 64;
  int patience = 25;
  double valid_fraction = 0.1;  // early-stopping holdout
  double test_fraction = 0.1;   // rows reserved for fidelity evaluation
  // build_corpus starts every network from one initialization drawn from the master seed
  bool shared_init = true;
};

nlohmann::json to_json(const LambdaConfig& config);
LambdaConfig lambda_config_from_json(const nlohmann::json& doc);

/// Row indices of one dataset.
struct RowSplit {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> valid;
  std::vector<Eigen::Index> test;
};

/// Deterministic shuffle-and-cut of `rows` row indices.
RowSplit split_rows(Eigen::Index rows, double valid_fraction, double test_fraction,
                    std::uint64_t seed);

struct LambdaNet {
  DenseNet net;
  Vector theta;
  std::string dataset_ref;
  RowSplit split;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::uint64_t seed = 0;

  Eigen::Index n() const { return net.input_dim(); }
};

/// theta length of the n -> hidden -> 1 architecture (128n + 257 at hidden = 128).
std::size_t lambda_theta_size(Eigen::Index n, Eigen::Index hidden = 128);

DenseNet lambda_architecture(Eigen::Index n, Eigen::Index hidden, std::uint64_t seed);

/// Trains on the rows of split.train, early-stops on split.valid and reports accuracy on
/// split.test (or the training rows when test is empty).
LambdaNet train_lambda_net(const Matrix& features, const Vector& labels, const RowSplit& split,
                           const LambdaConfig& config, std::uint64_t seed,
                           std::string dataset_ref = {},
                           std::optional<std::uint64_t> init_seed = std::nullopt);

/// Splits ds with the configured fractions, then trains.
LambdaNet train_lambda_net(const SyntheticDataset& ds, const LambdaConfig& config,
                           std::uint64_t seed, std::string dataset_ref = {},
                           std::optional<std::uint64_t> init_seed = std::nullopt);

Vector flatten_params(const DenseNet& net);
DenseNet unflatten_params(const Vector& theta, Eigen::Index n, Eigen::Index hidden = 128);

double predict_lambda(const LambdaNet& lambda, std::span<const double> x);
Vector predict_lambda(const LambdaNet& lambda, const Matrix& x);

/// Half-up rounding of probabilities to {0,1}.
Vector round_half_up(const Vector& probs);

nlohmann::json lambda_to_json(const LambdaNet& lambda);
LambdaNet lambda_from_json(const nlohmann::json& doc);
void save_lambda(const LambdaNet& lambda, const std::filesystem::path& path);
LambdaNet load_lambda(const std::filesystem::path& path);

enum class CorpusSplit { train, valid, test };
std::string_view to_string(CorpusSplit split);
CorpusSplit corpus_split_from_string(std::string_view name);

struct CorpusEntry {
  std::string id;
  CorpusSplit split = CorpusSplit::train;
  LambdaNet lambda;
  SyntheticDataset dataset;
};

struct CorpusSpec {
  std::size_t count_train = 0;
  std::size_t count_valid = 0;
  std::size_t count_test = 0;
  Eigen::Index n = 2;
  Eigen::Index m = 5000;
  double p = 5.0;
  std::uint64_t master_seed = 0;
  LambdaConfig lambda;
  int max_consecutive_rejections = 100;
  SeparabilityConfig separability;
};

struct LambdaCorpus {
  CorpusSpec spec;
  std::vector<CorpusEntry> entries;

  std::vector<const CorpusEntry*> split(CorpusSplit which) const;
};

/// Generates non-separable datasets, trains one network per dataset and tags the entries
/// train/valid/test in that order. Entries are built in parallel (INET_THREADS).
LambdaCorpus build_corpus(const CorpusSpec& spec);

/// Directory layout: manifest.json, models/<id>.json, datasets/<id>.csv, datasets/<id>.json.
void save_corpus(const LambdaCorpus& corpus, const std::filesystem::path& dir);
LambdaCorpus load_corpus(const std::filesystem::path& dir);

}  // namespace inet
