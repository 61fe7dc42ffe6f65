#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "inet/common.hpp"
#include "json.hpp"

namespace inet {

enum class TreeFamily { standard_dt, univariate_sdt, standard_sdt };

std::string_view to_string(TreeFamily family);
TreeFamily family_from_string(std::string_view name);

inline std::size_t internal_count(int depth) { return (std::size_t{1} << depth) - 1; }
inline std::size_t leaf_count(int depth) { return std::size_t{1} << depth; }

/// Length of the flat parameter vector that describes one tree of the family.
std::size_t param_count(TreeFamily family, Eigen::Index n, int depth);

/// Segment offsets inside a flat tree parameter vector. Internal nodes are numbered
/// breadth first (children of j are 2j+1 and 2j+2); leaves left to right.
///
///   standard_dt:    identifiers[I x n] | splits[I x n] | leaf probabilities[L]
///   univariate_sdt: identifiers[I x n] | filter values[I x n] | biases[I] | leaf logits[L x 2]
///   standard_sdt:   filters[I x n] | biases[I] | leaf logits[L x 2]
struct ThetaLayout {
  static constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);

  TreeFamily family = TreeFamily::standard_dt;
  Eigen::Index n = 0;
  int depth = 0;
  std::size_t identifiers = kAbsent;
  std::size_t splits = kAbsent;
  std::size_t filters = kAbsent;
  std::size_t biases = kAbsent;
  std::size_t leaves = kAbsent;
  std::size_t total = 0;

  static ThetaLayout make(TreeFamily family, Eigen::Index n, int depth);

  std::size_t internal_nodes() const { return internal_count(depth); }
  std::size_t leaf_nodes() const { return leaf_count(depth); }
};

/// Complete binary tree with "x[feature] < split" tests; the left child is the true branch.
struct StandardTree {
  int depth = 0;
  Eigen::Index n = 0;
  std::vector<Eigen::Index> features;  // per internal node
  std::vector<double> splits;          // per internal node, in [0,1]
  std::vector<double> leaf_probs;      // class-1 probability per leaf

  void validate() const;
};

/// Multivariate soft tree: P_right(x) = sigmoid(x.w + b), leaf distribution softmax(phi).
struct SoftTree {
  int depth = 0;
  Eigen::Index n = 0;
  Matrix filters;      // internal x n
  Vector biases;       // internal
  Matrix leaf_logits;  // leaves x 2

  void validate() const;
};

/// Soft tree with a single nonzero filter entry per internal node.
struct UnivariateSoftTree {
  int depth = 0;
  Eigen::Index n = 0;
  std::vector<Eigen::Index> features;
  Vector filter_values;
  Vector biases;
  Matrix leaf_logits;

  void validate() const;
};

using TreeModel = std::variant<StandardTree, SoftTree, UnivariateSoftTree>;

TreeFamily family_of(const TreeModel& tree);
Eigen::Index feature_count(const TreeModel& tree);

/// Expects head-activated values (softmax identifiers, squeezed-sigmoid splits, sigmoid leaves).
/// Each node uses the argmax identifier (lowest index on ties) and the split slot at that index.
StandardTree decode_standard(std::span<const double> theta_g, const ThetaLayout& layout);
SoftTree decode_soft(std::span<const double> theta_g, const ThetaLayout& layout);
/// Keeps the filter value at the argmax identifier of each node.
UnivariateSoftTree decode_univariate(std::span<const double> theta_g, const ThetaLayout& layout);
TreeModel decode(std::span<const double> theta_g, const ThetaLayout& layout);

/// Inverse direction: one-hot identifiers, every split slot of a node set to the node's split.
std::vector<double> encode(const TreeModel& tree);

double eval_standard(const StandardTree& tree, std::span<const double> x);

/// use_max_path: follow the right branch iff P_right > 0.5 and return the reached leaf's
/// class-1 probability; otherwise mix every leaf by its path probability.
double eval_soft(const SoftTree& tree, std::span<const double> x, bool use_max_path);
double eval_univariate(const UnivariateSoftTree& tree, std::span<const double> x,
                       bool use_max_path);

/// Class-1 probability; soft families use maximum-path inference unless use_max_path is false.
double evaluate(const TreeModel& tree, std::span<const double> x, bool use_max_path = true);
Vector evaluate(const TreeModel& tree, const Matrix& x, bool use_max_path = true);

/// Path probability of every leaf (mixture mode).
std::vector<double> leaf_path_probabilities(const SoftTree& tree, std::span<const double> x);

SoftTree to_soft_tree(const UnivariateSoftTree& tree);

/// softmax(phi)_1 for a leaf logit pair.
inline double leaf_class1(double phi0, double phi1) { return 1.0 / (1.0 + std::exp(phi0 - phi1)); }

// ---------------------------------------------------------------------------------------
// Differentiable evaluation of a flat parameter vector, used to train against a tree head.

struct SoftEvalOptions {
  double gamma = 25.0;  // routing sharpness of the standard-DT relaxation
};

inline constexpr double kDefaultGamma = 25.0;

/// Standard-DT relaxation: p_left = sum_i id_i * sigmoid(gamma * (split_i - x_i)),
/// output = sum over leaves of path probability * leaf probability.
/// When grad is non-empty, adds scale * d(output)/d(theta_g) into it.
double eval_standard_soft(std::span<const double> theta_g, const ThetaLayout& layout,
                          std::span<const double> x, double gamma,
                          std::span<double> grad = {}, double scale = 1.0);

/// Mixture-mode soft evaluation of any family's flat vector; univariate heads route with the
/// identifier-weighted filter (id_i * value_i). Gradient contract as above.
double eval_theta_soft(std::span<const double> theta_g, const ThetaLayout& layout,
                       std::span<const double> x, const SoftEvalOptions& options,
                       std::span<double> grad = {}, double scale = 1.0);

// Soft routing over a complete tree. Nodes are numbered breadth first over all
// 2^(d+1) - 1 nodes; the last 2^d are leaves.

/// reach[k] = probability of arriving at node k given right-branch probabilities.
void routing_reach(int depth, std::span<const double> right_prob, std::span<double> reach);

/// Pulls dL/d(reach) from the leaves up to the root. reach_grad is updated in place
/// and dL/d(right_prob) is written to right_grad.
void routing_backward(int depth, std::span<const double> right_prob,
                      std::span<const double> reach, std::span<double> reach_grad,
                      std::span<double> right_grad);

// ---------------------------------------------------------------------------------------
// Export

nlohmann::json tree_to_json(const TreeModel& tree);
TreeModel tree_from_json(const nlohmann::json& doc);

/// Graphviz digraph; leaves show the class-1 probability and the thresholded class.
std::string to_dot(const TreeModel& tree);

inline constexpr int kTreeFormatVersion = 1;

}  // namespace inet
