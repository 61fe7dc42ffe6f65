#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "inet/common.hpp"
#include "json.hpp"

namespace inet {

enum class DistributionKind { uniform, normal, gamma, beta, poisson };

inline constexpr std::array<DistributionKind, 5> kAllDistributions = {
    DistributionKind::uniform, DistributionKind::normal, DistributionKind::gamma,
    DistributionKind::beta, DistributionKind::poisson};

std::string_view to_string(DistributionKind kind);
DistributionKind distribution_from_string(std::string_view name);

/// One parametrized family. p1/p2 follow the usual meaning of each family:
/// uniform (min, max), normal (mean, stddev), gamma (shape, scale), beta (alpha, beta),
/// poisson (lambda, no p2).
struct DistributionSpec {
  DistributionKind kind = DistributionKind::uniform;
  double p1 = 0.0;
  std::optional<double> p2;

  /// Throws ConfigError when the parameters are invalid for the family.
  void validate() const;
};

std::vector<double> sample_distribution(const DistributionSpec& spec, std::size_t count, Rng& rng);

/// How one feature column was produced.
struct FeatureProvenance {
  DistributionSpec first;   // D_{i,0}
  DistributionSpec second;  // D_{i,1}
  std::size_t first_count = 0;  // M0
  std::size_t total_count = 0;  // M
  double raw_min = 0.0;         // min-max scaling applied to the raw column
  double raw_max = 0.0;
};

struct SyntheticDataset {
  Matrix features;          // M x n, every value in [0,1]
  std::vector<int> labels;  // first ceil(M/2) zeros, then ones
  std::vector<FeatureProvenance> provenance;
  std::uint64_t seed = 0;
  double p = 5.0;

  Eigen::Index n() const { return features.cols(); }
  Eigen::Index m() const { return features.rows(); }
  Vector label_vector() const;
};

/// Lower bound of the parameter range; several families need strictly positive values.
inline constexpr double kParamFloor = 0.05;

/// Multi-distribution dataset generation with n features and M rows.
SyntheticDataset generate_dataset(Eigen::Index n, Eigen::Index m, double p, std::uint64_t seed);

/// Fresh rows drawn from the same per-feature mixtures as a generated dataset, mapped through
/// the dataset's scaling and clipped to [0,1].
Matrix sample_like(const std::vector<FeatureProvenance>& provenance, std::size_t count, Rng& rng);

struct SeparabilityConfig {
  int max_epochs = 1000;
};

/// Perceptron with a bias input; when it does not converge within max_epochs the
/// answer comes from an exact check that the two class hulls are disjoint.
bool is_linearly_separable(const Matrix& features, std::span<const int> labels,
                           const SeparabilityConfig& config = {});
bool is_linearly_separable(const SyntheticDataset& ds, const SeparabilityConfig& config = {});

enum class QueryStrategy { multi_distribution, standard_uniform, standard_normal };

inline constexpr std::array<QueryStrategy, 3> kAllStrategies = {
    QueryStrategy::multi_distribution, QueryStrategy::standard_uniform,
    QueryStrategy::standard_normal};

std::string_view to_string(QueryStrategy strategy);
QueryStrategy strategy_from_string(std::string_view name);

struct QueryPoints {
  Matrix points;  // count x n in [0,1]
  std::vector<FeatureProvenance> provenance;  // filled for multi_distribution only
};

inline constexpr std::size_t kDefaultQueryCount = 10000;

QueryPoints sample_query_points(QueryStrategy strategy, std::size_t count, Eigen::Index n,
                                double p, Rng& rng);

/// Min-max scales each column in place; constant columns become all zero.
/// Returns per-column (min, max).
std::vector<std::pair<double, double>> minmax_scale_columns(Matrix& data);

// Persistence: CSV with header f0..f{n-1},label and a provenance sidecar.
nlohmann::json provenance_to_json(const SyntheticDataset& ds);
void save_dataset(const SyntheticDataset& ds, const std::filesystem::path& csv_path,
                  const std::filesystem::path& provenance_path);
SyntheticDataset load_dataset(const std::filesystem::path& csv_path,
                              const std::filesystem::path& provenance_path);

}  // namespace inet
