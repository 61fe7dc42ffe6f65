#include "inet/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "inet/csv.hpp"

namespace inet {

namespace {

constexpr std::pair<DistributionKind, std::string_view> kDistributionNames[] = {
    {DistributionKind::uniform, "uniform"}, {DistributionKind::normal, "normal"},
    {DistributionKind::gamma, "gamma"},     {DistributionKind::beta, "beta"},
    {DistributionKind::poisson, "poisson"},
};

constexpr std::pair<QueryStrategy, std::string_view> kStrategyNames[] = {
    {QueryStrategy::multi_distribution, "multi_distribution"},
    {QueryStrategy::standard_uniform, "standard_uniform"},
    {QueryStrategy::standard_normal, "standard_normal"},
};

double draw_beta(double alpha, double beta, Rng& rng) {
  std::gamma_distribution<double> ga(alpha, 1.0);
  std::gamma_distribution<double> gb(beta, 1.0);
  for (;;) {
    const double x = ga(rng);
    const double y = gb(rng);
    if (x + y > 0.0) return x / (x + y);
  }
}

// Phase-one simplex on the convex-combination system
//   sum_i a_i x_i - sum_j b_j x_j = 0, sum a = 1, sum b = 1, a, b >= 0
// which is feasible iff the class hulls meet. Bland's rule, dense tableau.
bool hulls_intersect(const Matrix& x, std::span<const int> labels) {
  const Eigen::Index rows = x.rows();
  const Eigen::Index n = x.cols();
  const Eigen::Index m = n + 2;
  Eigen::Index ones = 0;
  for (int y : labels) ones += y == 1;
  if (ones == 0 || ones == rows) return false;
  // columns: one per point, then one artificial per constraint, then the rhs
  Matrix t = Matrix::Zero(m, rows + m + 1);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const bool pos = labels[static_cast<std::size_t>(r)] == 1;
    for (Eigen::Index k = 0; k < n; ++k) t(k, r) = pos ? x(r, k) : -x(r, k);
    t(pos ? n : n + 1, r) = 1.0;
  }
  t(n, rows + m) = 1.0;
  t(n + 1, rows + m) = 1.0;
  for (Eigen::Index i = 0; i < m; ++i) t(i, rows + i) = 1.0;
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) basis[static_cast<std::size_t>(i)] = rows + i;
  constexpr double eps = 1e-11;
  const Eigen::Index cols = rows + m;
  for (;;) {
    // reduced costs of the artificial-sum objective: -(column sums over the rows)
    Eigen::Index enter = -1;
    for (Eigen::Index c = 0; c < cols && enter < 0; ++c) {
      if (std::find(basis.begin(), basis.end(), c) != basis.end()) continue;
      double reduced = c >= rows ? 1.0 : 0.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (basis[static_cast<std::size_t>(i)] >= rows) reduced -= t(i, c);
      }
      if (reduced < -eps) enter = c;
    }
    if (enter < 0) break;
    Eigen::Index leave = -1;
    double best = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (t(i, enter) <= eps) continue;
      const double ratio = t(i, cols) / t(i, enter);
      const bool tie = leave >= 0 && std::fabs(ratio - best) <= eps;
      if (leave < 0 || ratio < best - eps ||
          (tie && basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
        best = leave < 0 ? ratio : std::min(best, ratio);
        leave = i;
      }
    }
    if (leave < 0) break;  // unbounded cannot happen with a bounded objective
    t.row(leave) /= t(leave, enter);
    for (Eigen::Index i = 0; i < m; ++i) {
      if (i != leave && t(i, enter) != 0.0) t.row(i) -= t(i, enter) * t.row(leave);
    }
    basis[static_cast<std::size_t>(leave)] = enter;
  }
  double residual = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (basis[static_cast<std::size_t>(i)] >= rows) residual += t(i, cols);
  }
  return residual <= 1e-9;
}

DistributionSpec random_spec(DistributionKind kind, double p, Rng& rng) {
  std::uniform_real_distribution<double> param(kParamFloor, p);
  DistributionSpec spec{kind, param(rng), std::nullopt};
  if (kind != DistributionKind::poisson) {
    spec.p2 = param(rng);
    if (kind == DistributionKind::uniform && *spec.p2 < spec.p1) std::swap(spec.p1, *spec.p2);
  }
  return spec;
}

nlohmann::json spec_to_json(const DistributionSpec& spec) {
  nlohmann::json doc = {{"kind", to_string(spec.kind)}, {"p1", spec.p1}};
  if (spec.p2) doc["p2"] = *spec.p2;
  return doc;
}

DistributionSpec spec_from_json(const nlohmann::json& doc) {
  DistributionSpec spec;
  spec.kind = distribution_from_string(doc.at("kind").get<std::string>());
  spec.p1 = doc.at("p1").get<double>();
  if (doc.contains("p2")) spec.p2 = doc.at("p2").get<double>();
  spec.validate();
  return spec;
}

}  // namespace

std::string_view to_string(DistributionKind kind) {
  for (const auto& [k, name] : kDistributionNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

DistributionKind distribution_from_string(std::string_view name) {
  for (const auto& [k, n] : kDistributionNames) {
    if (n == name) return k;
  }
  throw ConfigError("unknown distribution '" + std::string(name) + "'");
}

std::string_view to_string(QueryStrategy strategy) {
  for (const auto& [k, name] : kStrategyNames) {
    if (k == strategy) return name;
  }
  return "unknown";
}

QueryStrategy strategy_from_string(std::string_view name) {
  for (const auto& [k, n] : kStrategyNames) {
    if (n == name) return k;
  }
  throw ConfigError("unknown query strategy '" + std::string(name) + "'");
}

void DistributionSpec::validate() const {
  const std::string name(to_string(kind));
  const auto positive = [&](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(name + ": " + what + " must be positive and finite");
    }
  };
  if (!std::isfinite(p1)) throw ConfigError(name + ": p1 must be finite");
  if (kind == DistributionKind::poisson) {
    if (p2) throw ConfigError("poisson takes exactly one parameter");
    positive(p1, "lambda");
    return;
  }
  if (!p2) throw ConfigError(name + " takes two parameters");
  if (!std::isfinite(*p2)) throw ConfigError(name + ": p2 must be finite");
  switch (kind) {
    case DistributionKind::uniform:
      if (*p2 < p1) throw ConfigError("uniform: minimum exceeds maximum");
      break;
    case DistributionKind::normal:
      positive(*p2, "scale");
      break;
    case DistributionKind::gamma:
      positive(p1, "shape");
      positive(*p2, "scale");
      break;
    case DistributionKind::beta:
      positive(p1, "alpha");
      positive(*p2, "beta");
      break;
    case DistributionKind::poisson:
      break;
  }
}

std::vector<double> sample_distribution(const DistributionSpec& spec, std::size_t count, Rng& rng) {
  spec.validate();
  if (count < 1) throw ConfigError("sample count must be at least 1");
  std::vector<double> out(count);
  switch (spec.kind) {
    case DistributionKind::uniform: {
      std::uniform_real_distribution<double> d(spec.p1, *spec.p2);
      for (double& v : out) v = d(rng);
      break;
    }
    case DistributionKind::normal: {
      std::normal_distribution<double> d(spec.p1, *spec.p2);
      for (double& v : out) v = d(rng);
      break;
    }
    case DistributionKind::gamma: {
      std::gamma_distribution<double> d(spec.p1, *spec.p2);
      for (double& v : out) v = d(rng);
      break;
    }
    case DistributionKind::beta:
      for (double& v : out) v = draw_beta(spec.p1, *spec.p2, rng);
      break;
    case DistributionKind::poisson: {
      std::poisson_distribution<long long> d(spec.p1);
      for (double& v : out) v = static_cast<double>(d(rng));
      break;
    }
  }
  return out;
}

Vector SyntheticDataset::label_vector() const {
  Vector y(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) y[static_cast<Eigen::Index>(i)] = labels[i];
  return y;
}

std::vector<std::pair<double, double>> minmax_scale_columns(Matrix& data) {
  std::vector<std::pair<double, double>> ranges;
  for (Eigen::Index c = 0; c < data.cols(); ++c) {
    const double lo = data.col(c).minCoeff();
    const double hi = data.col(c).maxCoeff();
    ranges.emplace_back(lo, hi);
    if (hi > lo) {
      data.col(c) = ((data.col(c).array() - lo) / (hi - lo)).matrix();
    } else {
      data.col(c).setZero();
    }
  }
  return ranges;
}

SyntheticDataset generate_dataset(Eigen::Index n, Eigen::Index m, double p, std::uint64_t seed) {
  if (n < 1) throw ConfigError("generate_dataset: n must be at least 1");
  if (m < 2) throw ConfigError("generate_dataset: M must be at least 2");
  if (!(p > kParamFloor)) {
    throw ConfigError("generate_dataset: p must exceed " + format_double(kParamFloor));
  }
  Rng rng(seed);
  SyntheticDataset ds;
  ds.seed = seed;
  ds.p = p;
  ds.features.resize(m, n);
  std::uniform_int_distribution<int> pick_kind(0, static_cast<int>(kAllDistributions.size()) - 1);
  std::uniform_real_distribution<double> pick_count(1.0, static_cast<double>(m - 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    FeatureProvenance prov;
    const DistributionKind kind = kAllDistributions[static_cast<std::size_t>(pick_kind(rng))];
    prov.first_count = static_cast<std::size_t>(std::ceil(pick_count(rng)));
    prov.first_count = std::clamp<std::size_t>(prov.first_count, 1, static_cast<std::size_t>(m - 1));
    prov.total_count = static_cast<std::size_t>(m);
    prov.first = random_spec(kind, p, rng);
    prov.second = random_spec(kind, p, rng);
    const auto head = sample_distribution(prov.first, prov.first_count, rng);
    const auto tail =
        sample_distribution(prov.second, static_cast<std::size_t>(m) - prov.first_count, rng);
    for (std::size_t j = 0; j < head.size(); ++j) ds.features(static_cast<Eigen::Index>(j), i) = head[j];
    for (std::size_t j = 0; j < tail.size(); ++j) {
      ds.features(static_cast<Eigen::Index>(head.size() + j), i) = tail[j];
    }
    ds.provenance.push_back(prov);
  }
  const auto ranges = minmax_scale_columns(ds.features);
  for (Eigen::Index i = 0; i < n; ++i) {
    ds.provenance[static_cast<std::size_t>(i)].raw_min = ranges[static_cast<std::size_t>(i)].first;
    ds.provenance[static_cast<std::size_t>(i)].raw_max = ranges[static_cast<std::size_t>(i)].second;
  }
  const Eigen::Index zeros = (m + 1) / 2;
  ds.labels.assign(static_cast<std::size_t>(m), 1);
  std::fill(ds.labels.begin(), ds.labels.begin() + zeros, 0);
  return ds;
}

Matrix sample_like(const std::vector<FeatureProvenance>& provenance, std::size_t count, Rng& rng) {
  if (count < 1) throw ConfigError("sample_like: count must be at least 1");
  Matrix out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(provenance.size()));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < provenance.size(); ++i) {
    const FeatureProvenance& prov = provenance[i];
    if (prov.total_count == 0) throw DataError("sample_like: provenance lacks a row count");
    // Mixture weight is the share of rows drawn from the first parametrization.
    const double weight =
        static_cast<double>(prov.first_count) / static_cast<double>(prov.total_count);
    const auto first_draws = sample_distribution(prov.first, count, rng);
    const auto second_draws = sample_distribution(prov.second, count, rng);
    const double span = prov.raw_max - prov.raw_min;
    for (std::size_t r = 0; r < count; ++r) {
      const double raw = unit(rng) < weight ? first_draws[r] : second_draws[r];
      const double scaled = span > 0.0 ? (raw - prov.raw_min) / span : 0.0;
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) =
          std::clamp(scaled, 0.0, 1.0);
    }
  }
  return out;
}

bool is_linearly_separable(const Matrix& features, std::span<const int> labels,
                           const SeparabilityConfig& config) {
  const Eigen::Index rows = features.rows();
  if (static_cast<std::size_t>(rows) != labels.size()) {
    throw DataError("is_linearly_separable: label count does not match rows");
  }
  Vector w = Vector::Zero(features.cols());
  double bias = 0.0;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::size_t mistakes = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double sign = labels[static_cast<std::size_t>(r)] == 1 ? 1.0 : -1.0;
      const double margin = sign * (features.row(r).dot(w) + bias);
      if (margin <= 0.0) {
        w += sign * features.row(r).transpose();
        bias += sign;
        ++mistakes;
      }
    }
    if (mistakes == 0) return true;
  }
  return !hulls_intersect(features, labels);
}

bool is_linearly_separable(const SyntheticDataset& ds, const SeparabilityConfig& config) {
  return is_linearly_separable(ds.features, ds.labels, config);
}

QueryPoints sample_query_points(QueryStrategy strategy, std::size_t count, Eigen::Index n,
                                double p, Rng& rng) {
  if (n < 1) throw ConfigError("sample_query_points: n must be at least 1");
  if (count < 1) throw ConfigError("sample_query_points: count must be at least 1");
  QueryPoints q;
  const auto rows = static_cast<Eigen::Index>(count);
  switch (strategy) {
    case QueryStrategy::multi_distribution: {
      if (count < 2) throw ConfigError("multi_distribution queries need at least 2 points");
      SyntheticDataset ds = generate_dataset(n, rows, p, rng());
      q.points = std::move(ds.features);
      q.provenance = std::move(ds.provenance);
      break;
    }
    case QueryStrategy::standard_uniform: {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      q.points.resize(rows, n);
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) q.points(r, c) = unit(rng);
      }
      break;
    }
    case QueryStrategy::standard_normal: {
      std::normal_distribution<double> normal(0.0, 1.0);
      q.points.resize(rows, n);
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) q.points(r, c) = normal(rng);
      }
      minmax_scale_columns(q.points);
      break;
    }
  }
  return q;
}

nlohmann::json provenance_to_json(const SyntheticDataset& ds) {
  nlohmann::json features = nlohmann::json::array();
  for (const FeatureProvenance& prov : ds.provenance) {
    features.push_back({{"first", spec_to_json(prov.first)},
                        {"second", spec_to_json(prov.second)},
                        {"m0", prov.first_count},
                        {"m", prov.total_count},
                        {"raw_min", prov.raw_min},
                        {"raw_max", prov.raw_max}});
  }
  return {{"format_version", 1}, {"seed", ds.seed}, {"n", ds.n()},
          {"m", ds.m()},         {"p", ds.p},       {"features", features}};
}

void save_dataset(const SyntheticDataset& ds, const std::filesystem::path& csv_path,
                  const std::filesystem::path& provenance_path) {
  std::ostringstream out;
  std::vector<std::string> fields;
  for (Eigen::Index c = 0; c < ds.n(); ++c) fields.push_back("f" + std::to_string(c));
  fields.push_back("label");
  write_csv_row(out, fields);
  for (Eigen::Index r = 0; r < ds.m(); ++r) {
    fields.clear();
    for (Eigen::Index c = 0; c < ds.n(); ++c) fields.push_back(format_double(ds.features(r, c)));
    fields.push_back(std::to_string(ds.labels[static_cast<std::size_t>(r)]));
    write_csv_row(out, fields);
  }
  write_text_file(csv_path, out.str());
  write_text_file(provenance_path, provenance_to_json(ds).dump(2) + "\n");
}

SyntheticDataset load_dataset(const std::filesystem::path& csv_path,
                              const std::filesystem::path& provenance_path) {
  const CsvTable table = read_csv(csv_path);
  if (table.header.size() < 2 || table.header.back() != "label") {
    throw DataError(csv_path.string() + ": expected header f0..f{n-1},label");
  }
  const auto n = static_cast<Eigen::Index>(table.header.size() - 1);
  SyntheticDataset ds;
  ds.features.resize(static_cast<Eigen::Index>(table.rows.size()), n);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      ds.features(static_cast<Eigen::Index>(r), c) =
          parse_double(table.rows[r][static_cast<std::size_t>(c)], csv_path.string());
    }
    const double label = parse_double(table.rows[r].back(), csv_path.string());
    if (label != 0.0 && label != 1.0) throw DataError(csv_path.string() + ": non-binary label");
    ds.labels.push_back(static_cast<int>(label));
  }
  const auto doc = nlohmann::json::parse(read_text_file(provenance_path));
  ds.seed = doc.at("seed").get<std::uint64_t>();
  ds.p = doc.at("p").get<double>();
  for (const auto& f : doc.at("features")) {
    FeatureProvenance prov;
    prov.first = spec_from_json(f.at("first"));
    prov.second = spec_from_json(f.at("second"));
    prov.first_count = f.at("m0").get<std::size_t>();
    prov.total_count = f.at("m").get<std::size_t>();
    prov.raw_min = f.at("raw_min").get<double>();
    prov.raw_max = f.at("raw_max").get<double>();
    ds.provenance.push_back(prov);
  }
  if (static_cast<Eigen::Index>(ds.provenance.size()) != n) {
    throw DataError(provenance_path.string() + ": provenance does not match feature count");
  }
  return ds;
}

}  // namespace inet
