#include "inet/evalharness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "inet/csv.hpp"
#include "inet/parallel.hpp"

namespace inet {

double fidelity(const Vector& surrogate_probs, const Vector& lambda_probs) {
  if (surrogate_probs.size() != lambda_probs.size() || surrogate_probs.size() == 0) {
    throw DataError("fidelity: prediction vectors must be non-empty and equal length");
  }
  Eigen::Index agree = 0;
  for (Eigen::Index i = 0; i < surrogate_probs.size(); ++i) {
    const bool s = surrogate_probs[i] >= 0.5;
    const bool l = lambda_probs[i] >= 0.5;
    if (s == l) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(surrogate_probs.size());
}

double fidelity(const TreeModel& surrogate, const LambdaNet& lambda, const Matrix& x) {
  if (x.rows() < 1) throw DataError("fidelity: no rows");
  if (x.cols() != lambda.n() || x.cols() != feature_count(surrogate)) {
    throw DataError("fidelity: feature count mismatch between rows, network and surrogate");
  }
  return fidelity(evaluate(surrogate, x), predict_lambda(lambda, x));
}

WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw DataError("welch_t_test: empty sample");
  auto moments = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double var = v.size() > 1 ? ss / static_cast<double>(v.size() - 1) : 0.0;
    return std::pair{mean, var};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double sa = va / na;
  const double sb = vb / nb;
  WelchResult r;
  if (sa + sb <= 0.0) {
    r.t = ma == mb ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), ma - mb);
    r.df = std::numeric_limits<double>::infinity();
    r.p_value = ma == mb ? 1.0 : 0.0;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(sa + sb);
  double denom = 0.0;
  if (a.size() > 1) denom += sa * sa / (na - 1.0);
  if (b.size() > 1) denom += sb * sb / (nb - 1.0);
  r.df = (sa + sb) * (sa + sb) / denom;
  const boost::math::students_t dist(r.df);
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

std::vector<AggregateRow> aggregate(const std::vector<FidelityRow>& rows, double alpha) {
  struct Group {
    AggregateRow row;
    std::vector<double> values;
  };
  std::vector<Group> groups;
  for (const FidelityRow& r : rows) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return g.row.target_id == r.target_id && g.row.family == r.family && g.row.method == r.method;
    });
    if (it == groups.end()) {
      AggregateRow head;
      head.target_id = r.target_id;
      head.family = r.family;
      head.method = r.method;
      groups.push_back({std::move(head), {}});
      it = std::prev(groups.end());
    }
    it->values.push_back(r.fidelity);
  }
  for (Group& g : groups) {
    const double n = static_cast<double>(g.values.size());
    double mean = 0.0;
    for (double v : g.values) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : g.values) ss += (v - mean) * (v - mean);
    g.row.count = g.values.size();
    g.row.mean = mean;
    g.row.std = std::sqrt(ss / n);
  }
  std::vector<bool> done(groups.size(), false);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (done[i]) continue;
    std::vector<std::size_t> members;
    for (std::size_t k = i; k < groups.size(); ++k) {
      if (groups[k].row.target_id == groups[i].row.target_id && groups[k].row.family == groups[i].row.family) {
        members.push_back(k);
        done[k] = true;
      }
    }
    double top = -1.0;
    for (std::size_t k : members) top = std::max(top, groups[k].row.mean);
    for (std::size_t k : members) groups[k].row.winner = groups[k].row.mean == top;
    std::optional<std::size_t> inet_group;
    std::optional<std::size_t> best_strategy;
    for (std::size_t k : members) {
      if (groups[k].row.method == kInetMethod) {
        inet_group = k;
      } else if (!best_strategy || groups[k].row.mean > groups[*best_strategy].row.mean) {
        best_strategy = k;
      }
    }
    if (inet_group && best_strategy) {
      const double p = welch_t_test(groups[*inet_group].values, groups[*best_strategy].values).p_value;
      groups[*inet_group].row.p_value = p;
      groups[*best_strategy].row.p_value = p;
      if (p >= alpha && (groups[*inet_group].row.winner || groups[*best_strategy].row.winner)) {
        groups[*inet_group].row.winner = true;
        groups[*best_strategy].row.winner = true;
      }
    }
  }
  std::vector<AggregateRow> out;
  out.reserve(groups.size());
  for (Group& g : groups) out.push_back(std::move(g.row));
  return out;
}

std::vector<BenchmarkTarget> corpus_targets(const LambdaCorpus& corpus, CorpusSplit split) {
  std::vector<BenchmarkTarget> out;
  for (const CorpusEntry* e : corpus.split(split)) {
    const auto& rows = e->lambda.split.test;
    if (rows.empty()) throw DataError("corpus entry " + e->id + " has no held-out rows");
    Matrix x(static_cast<Eigen::Index>(rows.size()), e->dataset.features.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) x.row(static_cast<Eigen::Index>(k)) = e->dataset.features.row(rows[k]);
    out.push_back({e->id, e->lambda, std::move(x)});
  }
  return out;
}

std::uint64_t trial_seed(std::uint64_t master, std::size_t target_index, QueryStrategy strategy,
                         int trial) {
  return derive_seed(derive_seed(master, streams::query, target_index),
                     static_cast<std::uint64_t>(strategy), static_cast<std::uint64_t>(trial));
}

FidelityReport run_benchmark(const std::vector<BenchmarkTarget>& targets,
                             const std::map<TreeFamily, const INetModel*>& inets,
                             const BenchmarkConfig& config) {
  if (config.trials < 1) throw ConfigError("benchmark.trials: must be at least 1");
  if (config.families.empty()) throw ConfigError("benchmark.families: at least one family required");
  struct Task {
    std::size_t target;
    TreeFamily family;
    std::optional<QueryStrategy> strategy;  // empty: I-Net row
    int trial;
  };
  std::vector<Task> tasks;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    for (TreeFamily family : config.families) {
      if (auto it = inets.find(family); it != inets.end() && it->second != nullptr) {
        tasks.push_back({t, family, std::nullopt, 0});
      }
      for (QueryStrategy s : config.strategies) {
        for (int k = 0; k < config.trials; ++k) tasks.push_back({t, family, s, k});
      }
    }
  }
  std::vector<FidelityRow> rows(tasks.size());
  parallel_for(tasks.size(), thread_count_from_env(), [&](std::size_t i) {
    const Task& task = tasks[i];
    const BenchmarkTarget& target = targets[task.target];
    const auto start = std::chrono::steady_clock::now();
    FidelityRow row;
    row.target_id = target.id;
    row.family = task.family;
    if (!task.strategy) {
      const INetModel& model = *inets.at(task.family);
      const TreeModel tree = interpret(model, target.lambda.theta);
      row.method = std::string(kInetMethod);
      row.fidelity = fidelity(tree, target.lambda, target.test_x);
    } else {
      row.method = std::string(to_string(*task.strategy));
      row.seed = trial_seed(config.master_seed, task.target, *task.strategy, task.trial);
      const DistillResult result = distill(target.lambda, task.family, *task.strategy, config.distill, row.seed);
      row.fidelity = fidelity(result.tree, target.lambda, target.test_x);
      row.fidelity_on_query = result.fidelity_on_query;
    }
    if (config.record_wall_time) {
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
    rows[i] = std::move(row);
  });
  FidelityReport report;
  report.aggregates = aggregate(rows, config.alpha);
  report.rows = std::move(rows);
  return report;
}

BoundaryGrid boundary_grid(const std::function<Vector(const Matrix&)>& predict, Eigen::Index n,
                           int resolution) {
  if (n != 2) throw DataError("boundary_grid: requires exactly 2 features, got " + std::to_string(n));
  if (resolution < 2) throw ConfigError("boundary.resolution: must be at least 2");
  BoundaryGrid grid;
  grid.resolution = resolution;
  for (int i = 0; i < resolution; ++i) grid.coords.push_back(static_cast<double>(i) / (resolution - 1));
  Matrix points(static_cast<Eigen::Index>(resolution) * resolution, 2);
  for (int r = 0; r < resolution; ++r) {
    for (int c = 0; c < resolution; ++c) {
      points(static_cast<Eigen::Index>(r) * resolution + c, 0) = grid.coords[static_cast<std::size_t>(c)];
      points(static_cast<Eigen::Index>(r) * resolution + c, 1) = grid.coords[static_cast<std::size_t>(r)];
    }
  }
  const Vector probs = predict(points);
  grid.labels.resize(static_cast<std::size_t>(probs.size()));
  for (Eigen::Index i = 0; i < probs.size(); ++i) grid.labels[static_cast<std::size_t>(i)] = probs[i] >= 0.5 ? 1 : 0;
  return grid;
}

BoundaryGrid boundary_grid(const LambdaNet& lambda, int resolution) {
  return boundary_grid([&](const Matrix& x) { return predict_lambda(lambda, x); }, lambda.n(), resolution);
}

BoundaryGrid boundary_grid(const TreeModel& tree, int resolution) {
  return boundary_grid([&](const Matrix& x) { return evaluate(tree, x); }, feature_count(tree), resolution);
}

std::vector<SweepRow> sample_size_sweep(const std::vector<BenchmarkTarget>& targets,
                                        const SweepConfig& config) {
  if (config.sizes.empty()) throw ConfigError("sweep.sizes: at least one size required");
  if (!std::is_sorted(config.sizes.begin(), config.sizes.end())) {
    throw ConfigError("sweep.sizes: must be ascending");
  }
  if (config.trials < 1) throw ConfigError("sweep.trials: must be at least 1");
  struct Task {
    std::size_t target;
    std::size_t size;
    QueryStrategy strategy;
    int trial;
  };
  std::vector<Task> tasks;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    for (std::size_t size : config.sizes) {
      for (QueryStrategy s : config.strategies) {
        for (int k = 0; k < config.trials; ++k) tasks.push_back({t, size, s, k});
      }
    }
  }
  std::vector<double> values(tasks.size());
  parallel_for(tasks.size(), thread_count_from_env(), [&](std::size_t i) {
    const Task& task = tasks[i];
    DistillConfig dc = config.distill;
    dc.query_count = task.size;
    const std::uint64_t seed = derive_seed(trial_seed(config.master_seed, task.target, task.strategy, task.trial),
                                           streams::query, task.size);
    const DistillResult result = distill(targets[task.target].lambda, config.family, task.strategy, dc, seed);
    values[i] = fidelity(result.tree, targets[task.target].lambda, targets[task.target].test_x);
  });
  std::vector<SweepRow> out;
  const auto trials = static_cast<std::size_t>(config.trials);
  for (std::size_t i = 0; i < tasks.size(); i += trials) {
    SweepRow row;
    row.target_id = targets[tasks[i].target].id;
    row.size = tasks[i].size;
    row.strategy = std::string(to_string(tasks[i].strategy));
    row.trials = trials;
    for (std::size_t k = 0; k < trials; ++k) row.mean += values[i + k];
    row.mean /= static_cast<double>(trials);
    double ss = 0.0;
    for (std::size_t k = 0; k < trials; ++k) ss += (values[i + k] - row.mean) * (values[i + k] - row.mean);
    row.std = std::sqrt(ss / static_cast<double>(trials));
    out.push_back(std::move(row));
  }
  return out;
}

std::map<std::pair<std::size_t, std::string>, double> sweep_means(const std::vector<SweepRow>& rows) {
  std::map<std::pair<std::size_t, std::string>, std::pair<double, std::size_t>> acc;
  for (const SweepRow& r : rows) {
    auto& slot = acc[{r.size, r.strategy}];
    slot.first += r.mean;
    slot.second += 1;
  }
  std::map<std::pair<std::size_t, std::string>, double> out;
  for (const auto& [key, value] : acc) out[key] = value.first / static_cast<double>(value.second);
  return out;
}

namespace {

std::string optional_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

void write_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  write_csv_row(out, header);
  for (const auto& r : rows) write_csv_row(out, r);
  write_text_file(path, out.str());
}

}  // namespace

void write_report_csv(const std::vector<FidelityRow>& rows, const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> body;
  for (const FidelityRow& r : rows) {
    body.push_back({r.target_id, std::string(to_string(r.family)), r.method, std::to_string(r.seed),
                    format_double(r.fidelity), optional_field(r.fidelity_on_query), optional_field(r.wall_ms)});
  }
  write_table(path, kReportColumns, body);
}

std::vector<FidelityRow> read_report_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  if (table.header != kReportColumns) throw DataError("report csv: unexpected header in " + path.string());
  std::vector<FidelityRow> rows;
  for (const auto& f : table.rows) {
    if (f.size() != kReportColumns.size()) throw DataError("report csv: wrong field count in " + path.string());
    FidelityRow r;
    r.target_id = f[0];
    r.family = family_from_string(f[1]);
    r.method = f[2];
    r.seed = std::stoull(f[3]);
    r.fidelity = parse_double(f[4], "fidelity");
    if (!f[5].empty()) r.fidelity_on_query = parse_double(f[5], "fidelity_on_query");
    if (!f[6].empty()) r.wall_ms = parse_double(f[6], "wall_ms");
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> body;
  for (const AggregateRow& r : rows) {
    body.push_back({r.target_id, std::string(to_string(r.family)), r.method, std::to_string(r.count),
                    format_double(r.mean), format_double(r.std), r.winner ? "1" : "0", optional_field(r.p_value)});
  }
  write_table(path, kAggregateColumns, body);
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> body;
  for (const SweepRow& r : rows) {
    body.push_back({r.target_id, std::to_string(r.size), r.strategy, std::to_string(r.trials),
                    format_double(r.mean), format_double(r.std)});
  }
  write_table(path, {"target_id", "size", "strategy", "trials", "mean", "std"}, body);
}

void write_grid_csv(const BoundaryGrid& grid, const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> body;
  const auto res = static_cast<std::size_t>(grid.resolution);
  for (std::size_t r = 0; r < res; ++r) {
    for (std::size_t c = 0; c < res; ++c) {
      body.push_back({format_double(grid.coords[c]), format_double(grid.coords[r]),
                      std::to_string(grid.labels[r * res + c])});
    }
  }
  write_table(path, {"x0", "x1", "label"}, body);
}

std::string grid_svg(const BoundaryGrid& grid, int cell_px) {
  const int size = grid.resolution * cell_px;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
      << "\" shape-rendering=\"crispEdges\">\n";
  const auto res = static_cast<std::size_t>(grid.resolution);
  for (std::size_t r = 0; r < res; ++r) {
    for (std::size_t c = 0; c < res; ++c) {
      // x1 grows upwards
      const int y = static_cast<int>(res - 1 - r) * cell_px;
      out << "<rect x=\"" << static_cast<int>(c) * cell_px << "\" y=\"" << y << "\" width=\"" << cell_px
          << "\" height=\"" << cell_px << "\" fill=\"" << (grid.labels[r * res + c] ? "#d95f02" : "#1b9e77")
          << "\"/>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace inet
