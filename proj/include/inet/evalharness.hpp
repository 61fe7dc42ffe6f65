#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "inet/distill.hpp"
#include "inet/inet.hpp"

namespace inet {

/// Fraction of rows where the thresholded surrogate (>= 0.5 -> 1) equals round(lambda(x)).
double fidelity(const Vector& surrogate_probs, const Vector& lambda_probs);
double fidelity(const TreeModel& surrogate, const LambdaNet& lambda, const Matrix& x);

inline constexpr std::string_view kInetMethod = "inet";

struct FidelityRow {
  std::string target_id;
  TreeFamily family = TreeFamily::standard_dt;
  std::string method;  // "inet" or a query strategy name
  std::uint64_t seed = 0;
  double fidelity = 0.0;
  std::optional<double> fidelity_on_query;
  std::optional<double> wall_ms;
};

struct AggregateRow {
  std::string target_id;
  TreeFamily family = TreeFamily::standard_dt;
  std::string method;
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  bool winner = false;
  std::optional<double> p_value;
};

struct FidelityReport {
  std::vector<FidelityRow> rows;
  std::vector<AggregateRow> aggregates;
};

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

/// Two-sided unpaired t-test with unequal variances (sample variances, ddof 1). A sample of
/// size 1 contributes zero variance.
WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

/// Per (target, family, method) mean and std, in first-appearance order. Within a
/// (target, family) the highest mean wins; the I-Net is compared against the best sampling
/// strategy and the loser of that pair also wins when p >= alpha.
std::vector<AggregateRow> aggregate(const std::vector<FidelityRow>& rows, double alpha = 0.05);

/// A network to benchmark together with the held-out rows fidelity is measured on.
struct BenchmarkTarget {
  std::string id;
  LambdaNet lambda;
  Matrix test_x;
};

/// Test split of every corpus test entry.
std::vector<BenchmarkTarget> corpus_targets(const LambdaCorpus& corpus, CorpusSplit split = CorpusSplit::test);

struct BenchmarkConfig {
  std::vector<TreeFamily> families{TreeFamily::standard_dt};
  std::vector<QueryStrategy> strategies{kAllStrategies.begin(), kAllStrategies.end()};
  int trials = 10;
  DistillConfig distill;
  std::uint64_t master_seed = 0;
  double alpha = 0.05;
  bool record_wall_time = false;
};

/// Seed of one sampling trial.
std::uint64_t trial_seed(std::uint64_t master, std::size_t target_index, QueryStrategy strategy,
                         int trial);

/// One I-Net row per (target, family) with a model in `inets`, plus `trials` rows per
/// strategy; trials run in parallel (INET_THREADS).
FidelityReport run_benchmark(const std::vector<BenchmarkTarget>& targets,
                             const std::map<TreeFamily, const INetModel*>& inets,
                             const BenchmarkConfig& config);

struct BoundaryGrid {
  int resolution = 0;
  std::vector<double> coords;  // i / (resolution - 1)
  std::vector<int> labels;     // row-major: labels[r * resolution + c] at (x0 = coords[c], x1 = coords[r])
};

BoundaryGrid boundary_grid(const std::function<Vector(const Matrix&)>& predict, Eigen::Index n,
                           int resolution);
BoundaryGrid boundary_grid(const LambdaNet& lambda, int resolution);
BoundaryGrid boundary_grid(const TreeModel& tree, int resolution);

struct SweepConfig {
  std::vector<std::size_t> sizes{1000, 10000, 100000};
  std::vector<QueryStrategy> strategies{kAllStrategies.begin(), kAllStrategies.end()};
  int trials = 3;
  TreeFamily family = TreeFamily::standard_dt;
  DistillConfig distill;
  std::uint64_t master_seed = 0;
};

struct SweepRow {
  std::string target_id;
  std::size_t size = 0;
  std::string strategy;
  std::size_t trials = 0;
  double mean = 0.0;
  double std = 0.0;
};

std::vector<SweepRow> sample_size_sweep(const std::vector<BenchmarkTarget>& targets,
                                        const SweepConfig& config);

/// Mean over targets of the per-target means, keyed by (size, strategy).
std::map<std::pair<std::size_t, std::string>, double> sweep_means(const std::vector<SweepRow>& rows);

// Files

inline const std::vector<std::string> kReportColumns = {
    "target_id", "family", "method", "seed", "fidelity", "fidelity_on_query", "wall_ms"};
inline const std::vector<std::string> kAggregateColumns = {
    "target_id", "family", "method", "count", "mean", "std", "winner", "p_value"};

void write_report_csv(const std::vector<FidelityRow>& rows, const std::filesystem::path& path);
std::vector<FidelityRow> read_report_csv(const std::filesystem::path& path);
void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::filesystem::path& path);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);
void write_grid_csv(const BoundaryGrid& grid, const std::filesystem::path& path);
std::string grid_svg(const BoundaryGrid& grid, int cell_px = 4);

}  // namespace inet
