#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "inet/datagen.hpp"
#include "inet/lambdanet.hpp"
#include "inet/trees.hpp"

namespace inet {

// ---------------------------------------------------------------------------------------
// CART

struct CartConfig {
  int max_depth = 3;
  std::string criterion = "gini";
  int min_samples_split = 2;
  int min_samples_leaf = 1;

  void validate() const;
};

/// Gini impurity of a node holding `positives` class-1 rows out of `count`.
double gini(std::size_t positives, std::size_t count);

struct SplitCandidate {
  bool valid = false;
  Eigen::Index feature = 0;
  double threshold = 0.0;
  double impurity = 0.0;  // weighted child impurity, sum_c (n_c / n) * gini_c
};

/// Best "x[f] < threshold" split over the given rows; thresholds are midpoints between
/// consecutive distinct values. Ties go to the lower feature, then the lower threshold.
SplitCandidate best_split(const Matrix& x, std::span<const int> y, std::span<const Eigen::Index> rows,
                          int min_samples_leaf = 1);

/// Greedy CART grown into a complete tree of max_depth. Nodes that cannot be split keep
/// feature 0, split 0 and hand their label distribution to both children.
StandardTree cart_fit(const Matrix& x, std::span<const int> y, const CartConfig& config = {});
StandardTree cart_fit(const Matrix& x, const Vector& y, const CartConfig& config = {});

// ---------------------------------------------------------------------------------------
// Soft decision trees

struct SDTTrainConfig {
  int depth = 3;
  double learning_rate = 0.01;
  std::string criterion = "binary_crossentropy";
  double lambda_reg = 0.001;
  double beta = 1.0;
  double weight_decay = 0.0005;
  bool max_path = true;
  bool univariate = false;
  double beta2 = 10.0;
  int epochs = 200;
  int patience = 20;
  int batch_size = 64;
  double valid_fraction = 0.1;
  bool round_targets = true;

  void validate() const;
};

/// Trainable SDT parameters: raw filters, biases and leaf logits.
struct SdtParams {
  Matrix w;    // internal x n
  Vector b;    // internal
  Matrix phi;  // leaves x 2

  static SdtParams zeros(int depth, Eigen::Index n);
  int depth() const;
  std::size_t size() const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
};

/// Filters seen by the routing: w itself, or w * softmax(beta2 * |w|) per node when univariate.
Matrix effective_filters(const Matrix& w, const SDTTrainConfig& config);

/// Training objective on a batch: mean clamped BCE of the mixture output against targets,
/// plus the depth-decayed balance penalty and L2 weight decay on w. Fills grad if non-null.
double sdt_objective(const SdtParams& params, const Matrix& x, const Vector& targets,
                     const SDTTrainConfig& config, SdtParams* grad = nullptr);

struct SdtHistory {
  std::vector<double> train_loss;
  std::vector<double> valid_loss;
  int best_epoch = -1;
};

/// Multivariate SoftTree, or a UnivariateSoftTree when config.univariate is set. The
/// returned tree has beta folded into its filters and biases.
TreeModel sdt_fit(const Matrix& x, const Vector& y_prob, const SDTTrainConfig& config,
                  std::uint64_t seed, SdtHistory* history = nullptr);

/// Tree export of trained parameters (beta folded in; univariate keeps the max-|w| entry).
TreeModel sdt_tree(const SdtParams& params, const SDTTrainConfig& config);

// ---------------------------------------------------------------------------------------
// Query-then-fit

struct DistillConfig {
  std::size_t query_count = kDefaultQueryCount;
  double p = 5.0;  // parameter bound of the multi-distribution strategy
  CartConfig cart;
  SDTTrainConfig sdt;
};

struct DistillResult {
  TreeModel tree;
  Matrix queries;
  double fidelity_on_query = 0.0;
};

/// Labels x with the network and fits the family (standard_dt -> CART on round(lambda(x)),
/// soft families -> sdt_fit on lambda(x)).
DistillResult distill_on_points(const LambdaNet& lambda, TreeFamily family, Matrix x,
                                const DistillConfig& config, std::uint64_t seed);

DistillResult distill(const LambdaNet& lambda, TreeFamily family, QueryStrategy strategy,
                      const DistillConfig& config, std::uint64_t seed);

nlohmann::json to_json(const CartConfig& config);
nlohmann::json to_json(const SDTTrainConfig& config);
nlohmann::json to_json(const DistillConfig& config);
CartConfig cart_config_from_json(const nlohmann::json& doc);
SDTTrainConfig sdt_config_from_json(const nlohmann::json& doc);
DistillConfig distill_config_from_json(const nlohmann::json& doc);

}  // namespace inet
