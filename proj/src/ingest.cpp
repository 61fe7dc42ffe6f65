#include "inet/ingest.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "inet/lambdanet.hpp"

namespace inet {

namespace {

constexpr std::array<std::pair<ColumnRole, std::string_view>, 6> kRoleNames = {{
    {ColumnRole::identifier, "identifier"},
    {ColumnRole::numeric, "numeric"},
    {ColumnRole::ordinal, "ordinal"},
    {ColumnRole::categorical, "categorical"},
    {ColumnRole::nominal, "nominal"},
    {ColumnRole::label, "label"},
}};

}  // namespace

std::string_view to_string(ColumnRole role) {
  for (const auto& [r, name] : kRoleNames) {
    if (r == role) return name;
  }
  throw ConfigError("unknown column role");
}

ColumnRole column_role_from_string(std::string_view name) {
  for (const auto& [r, n] : kRoleNames) {
    if (n == name) return r;
  }
  throw ConfigError("unknown column role \"" + std::string(name) + "\"");
}

const ColumnSpec* ColumnSchema::find(const std::string& name) const {
  for (const ColumnSpec& c : columns) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

const ColumnSpec& ColumnSchema::label() const {
  for (const ColumnSpec& c : columns) {
    if (c.role == ColumnRole::label) return c;
  }
  throw ConfigError("schema: no label column");
}

void ColumnSchema::validate() const {
  std::set<std::string> names;
  int labels = 0;
  for (const ColumnSpec& c : columns) {
    if (!names.insert(c.name).second) throw ConfigError("schema.columns." + c.name + ": declared twice");
    if (c.role == ColumnRole::label) ++labels;
    if (c.role == ColumnRole::ordinal) {
      if (c.order.empty()) throw ConfigError("schema.columns." + c.name + ".order: required for ordinal columns");
      const std::set<std::string> unique(c.order.begin(), c.order.end());
      if (unique.size() != c.order.size()) {
        throw ConfigError("schema.columns." + c.name + ".order: values must be distinct");
      }
    }
  }
  if (labels != 1) throw ConfigError("schema.columns: exactly one label column required");
  if (!label_rule.positive.empty() && label_rule.threshold) {
    throw ConfigError("schema.label: use either positive or threshold, not both");
  }
}

ColumnSchema schema_from_json(const nlohmann::json& doc) {
  ColumnSchema schema;
  if (!doc.contains("columns") || !doc.at("columns").is_object()) {
    throw ConfigError("schema.columns: object mapping column name to role required");
  }
  for (const auto& [name, value] : doc.at("columns").items()) {
    ColumnSpec spec;
    spec.name = name;
    if (value.is_string()) {
      spec.role = column_role_from_string(value.get<std::string>());
    } else if (value.is_object()) {
      spec.role = column_role_from_string(value.at("role").get<std::string>());
      if (value.contains("order")) spec.order = value.at("order").get<std::vector<std::string>>();
    } else {
      throw ConfigError("schema.columns." + name + ": expected a role string or object");
    }
    schema.columns.push_back(std::move(spec));
  }
  if (doc.contains("label")) {
    const auto& label = doc.at("label");
    if (label.contains("positive")) schema.label_rule.positive = label.at("positive").get<std::vector<std::string>>();
    if (label.contains("threshold")) schema.label_rule.threshold = label.at("threshold").get<double>();
  }
  if (doc.contains("missing")) schema.missing = doc.at("missing").get<std::vector<std::string>>();
  schema.validate();
  return schema;
}

nlohmann::json to_json(const ColumnSchema& schema) {
  nlohmann::json columns = nlohmann::json::object();
  for (const ColumnSpec& c : schema.columns) {
    if (c.order.empty()) {
      columns[c.name] = to_string(c.role);
    } else {
      columns[c.name] = {{"role", to_string(c.role)}, {"order", c.order}};
    }
  }
  nlohmann::json label = nlohmann::json::object();
  if (!schema.label_rule.positive.empty()) label["positive"] = schema.label_rule.positive;
  if (schema.label_rule.threshold) label["threshold"] = *schema.label_rule.threshold;
  return {{"columns", columns}, {"label", label}, {"missing", schema.missing}};
}

void rebalance(Matrix& x, Vector& y, std::uint64_t seed, double below) {
  if (x.rows() != y.size()) throw DataError("rebalance: row and label counts differ");
  std::vector<Eigen::Index> zeros;
  std::vector<Eigen::Index> ones;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0) {
      zeros.push_back(i);
    } else if (y[i] == 1.0) {
      ones.push_back(i);
    } else {
      throw DataError("rebalance: labels must be 0 or 1");
    }
  }
  if (zeros.empty() || ones.empty()) throw DataError("rebalance: training labels contain a single class");
  const auto& minority = ones.size() < zeros.size() ? ones : zeros;
  const std::size_t majority = std::max(ones.size(), zeros.size());
  const double share = static_cast<double>(minority.size()) / static_cast<double>(y.size());
  if (share >= below) return;
  const std::size_t extra = majority - minority.size();
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, minority.size() - 1);
  const Eigen::Index old_rows = x.rows();
  Matrix grown(old_rows + static_cast<Eigen::Index>(extra), x.cols());
  Vector grown_y(old_rows + static_cast<Eigen::Index>(extra));
  grown.topRows(old_rows) = x;
  grown_y.head(old_rows) = y;
  for (std::size_t k = 0; k < extra; ++k) {
    const Eigen::Index src = minority[pick(rng)];
    grown.row(old_rows + static_cast<Eigen::Index>(k)) = x.row(src);
    grown_y[old_rows + static_cast<Eigen::Index>(k)] = y[src];
  }
  x = std::move(grown);
  y = std::move(grown_y);
}

namespace {

bool is_missing(const ColumnSchema& schema, const std::string& value) {
  return std::find(schema.missing.begin(), schema.missing.end(), value) != schema.missing.end();
}

Vector map_labels(const std::vector<std::string>& raw, const ColumnSchema& schema, const std::string& column) {
  Vector y(static_cast<Eigen::Index>(raw.size()));
  const LabelRule& rule = schema.label_rule;
  std::set<std::string> distinct;
  for (std::size_t r = 0; r < raw.size(); ++r) {
    if (is_missing(schema, raw[r])) {
      throw DataError("column " + column + ": missing label in data row " + std::to_string(r + 1));
    }
    distinct.insert(raw[r]);
  }
  if (!rule.positive.empty()) {
    for (std::size_t r = 0; r < raw.size(); ++r) {
      y[static_cast<Eigen::Index>(r)] =
          std::find(rule.positive.begin(), rule.positive.end(), raw[r]) != rule.positive.end() ? 1.0 : 0.0;
    }
    return y;
  }
  if (rule.threshold) {
    for (std::size_t r = 0; r < raw.size(); ++r) {
      y[static_cast<Eigen::Index>(r)] = parse_double(raw[r], "column " + column) > *rule.threshold ? 1.0 : 0.0;
    }
    return y;
  }
  if (distinct.size() != 2) {
    throw DataError("column " + column + ": label is not binary (" + std::to_string(distinct.size()) +
                    " distinct values); declare label.positive or label.threshold");
  }
  const std::string positive = distinct.count("0") && distinct.count("1") ? "1" : *distinct.rbegin();
  for (std::size_t r = 0; r < raw.size(); ++r) y[static_cast<Eigen::Index>(r)] = raw[r] == positive ? 1.0 : 0.0;
  return y;
}

template <typename T>
T mode_of(const std::map<T, std::size_t>& counts) {
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return best->first;
}

Matrix select_rows(const Matrix& x, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = x.row(rows[k]);
  return out;
}

Vector select(const Vector& v, const std::vector<Eigen::Index>& rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[rows[k]];
  return out;
}

}  // namespace

SplitDataset preprocess(const CsvTable& table, const ColumnSchema& schema, std::uint64_t seed,
                        const PreprocessConfig& config) {
  schema.validate();
  for (const std::string& name : table.header) {
    if (schema.find(name) == nullptr) throw DataError("unknown column \"" + name + "\" (not in schema)");
  }
  for (const ColumnSpec& c : schema.columns) {
    if (std::find(table.header.begin(), table.header.end(), c.name) == table.header.end()) {
      throw DataError("schema column \"" + c.name + "\" is absent from the table");
    }
  }
  const std::size_t rows = table.rows.size();
  if (rows < 20) throw DataError("preprocess: need at least 20 rows, got " + std::to_string(rows));
  for (std::size_t r = 0; r < rows; ++r) {
    if (table.rows[r].size() != table.header.size()) {
      throw DataError("data row " + std::to_string(r + 1) + ": expected " + std::to_string(table.header.size()) +
                      " fields, got " + std::to_string(table.rows[r].size()));
    }
  }
  auto column_values = [&](const std::string& name) {
    const auto c = static_cast<std::size_t>(std::find(table.header.begin(), table.header.end(), name) -
                                            table.header.begin());
    std::vector<std::string> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = table.rows[r][c];
    return out;
  };

  SplitDataset out;
  const std::string label_name = schema.label().name;
  const Vector labels = map_labels(column_values(label_name), schema, label_name);

  const RowSplit split = split_rows(static_cast<Eigen::Index>(rows), config.valid_fraction, config.test_fraction,
                                    derive_seed(seed, streams::ingest, 0));
  std::vector<Eigen::Index> stat_rows = split.train;
  if (config.scale_before_split) {
    stat_rows.resize(rows);
    std::iota(stat_rows.begin(), stat_rows.end(), Eigen::Index{0});
  }

  std::vector<Vector> columns;
  for (const std::string& name : table.header) {
    const ColumnSpec& spec = *schema.find(name);
    if (spec.role == ColumnRole::identifier || spec.role == ColumnRole::label) continue;
    const std::vector<std::string> raw = column_values(name);
    const std::string context = "column " + name;
    switch (spec.role) {
      case ColumnRole::numeric: {
        Vector v(static_cast<Eigen::Index>(rows));
        for (std::size_t r = 0; r < rows; ++r) {
          v[static_cast<Eigen::Index>(r)] =
              is_missing(schema, raw[r]) ? std::nan("") : parse_double(raw[r], context);
        }
        double sum = 0.0;
        std::size_t count = 0;
        for (Eigen::Index r : stat_rows) {
          if (!std::isnan(v[r])) {
            sum += v[r];
            ++count;
          }
        }
        if (count == 0) throw DataError(context + ": every value used for statistics is missing");
        const double mean = sum / static_cast<double>(count);
        out.imputed_numeric[name] = mean;
        for (Eigen::Index r = 0; r < v.size(); ++r) {
          if (std::isnan(v[r])) v[r] = mean;
        }
        columns.push_back(std::move(v));
        out.features.push_back({name, name, std::nullopt});
        break;
      }
      case ColumnRole::ordinal: {
        auto rank = [&](const std::string& value) {
          const auto it = std::find(spec.order.begin(), spec.order.end(), value);
          if (it == spec.order.end()) throw DataError(context + ": value \"" + value + "\" not in the declared order");
          return static_cast<std::size_t>(it - spec.order.begin());
        };
        std::map<std::size_t, std::size_t> counts;
        for (Eigen::Index r : stat_rows) {
          if (!is_missing(schema, raw[static_cast<std::size_t>(r)])) ++counts[rank(raw[static_cast<std::size_t>(r)])];
        }
        if (counts.empty()) throw DataError(context + ": every value used for statistics is missing");
        const std::size_t mode = mode_of(counts);
        out.imputed_category[name] = spec.order[mode];
        Vector v(static_cast<Eigen::Index>(rows));
        for (std::size_t r = 0; r < rows; ++r) {
          v[static_cast<Eigen::Index>(r)] = static_cast<double>(is_missing(schema, raw[r]) ? mode : rank(raw[r]));
        }
        columns.push_back(std::move(v));
        out.features.push_back({name, name, std::nullopt});
        break;
      }
      case ColumnRole::categorical:
      case ColumnRole::nominal: {
        std::map<std::string, std::size_t> counts;
        for (Eigen::Index r : stat_rows) {
          if (!is_missing(schema, raw[static_cast<std::size_t>(r)])) ++counts[raw[static_cast<std::size_t>(r)]];
        }
        if (counts.empty()) throw DataError(context + ": every value used for statistics is missing");
        const std::string mode = mode_of(counts);
        out.imputed_category[name] = mode;
        for (const auto& [category, count] : counts) {
          Vector v(static_cast<Eigen::Index>(rows));
          for (std::size_t r = 0; r < rows; ++r) {
            const std::string& value = is_missing(schema, raw[r]) ? mode : raw[r];
            v[static_cast<Eigen::Index>(r)] = value == category ? 1.0 : 0.0;
          }
          columns.push_back(std::move(v));
          out.features.push_back({name + "=" + category, name, category});
        }
        break;
      }
      default:
        break;
    }
  }
  if (columns.empty()) throw DataError("preprocess: no feature columns remain");

  Matrix x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) x.col(static_cast<Eigen::Index>(c)) = columns[c];
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (Eigen::Index r : stat_rows) {
      lo = std::min(lo, x(r, c));
      hi = std::max(hi, x(r, c));
    }
    FeatureInfo& info = out.features[static_cast<std::size_t>(c)];
    info.min = lo;
    info.max = hi;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      x(r, c) = hi > lo ? std::clamp((x(r, c) - lo) / (hi - lo), 0.0, 1.0) : 0.0;
    }
  }

  out.train_x = select_rows(x, split.train);
  out.valid_x = select_rows(x, split.valid);
  out.test_x = select_rows(x, split.test);
  out.train_y = select(labels, split.train);
  out.valid_y = select(labels, split.valid);
  out.test_y = select(labels, split.test);
  out.train_rows_before_rebalance = split.train.size();
  rebalance(out.train_x, out.train_y, derive_seed(seed, streams::ingest, 1), config.rebalance_below);
  return out;
}

namespace {

void write_labeled(const std::filesystem::path& path, const std::vector<FeatureInfo>& features, const Matrix& x,
                   const Vector& y) {
  std::ostringstream out;
  std::vector<std::string> header;
  for (const FeatureInfo& f : features) header.push_back(f.name);
  header.push_back("label");
  write_csv_row(out, header);
  std::vector<std::string> fields;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    fields.clear();
    for (Eigen::Index c = 0; c < x.cols(); ++c) fields.push_back(format_double(x(r, c)));
    fields.push_back(y[r] == 1.0 ? "1" : "0");
    write_csv_row(out, fields);
  }
  write_text_file(path, out.str());
}

}  // namespace

void save_split_dataset(const SplitDataset& data, const std::filesystem::path& dir) {
  write_labeled(dir / "train.csv", data.features, data.train_x, data.train_y);
  write_labeled(dir / "valid.csv", data.features, data.valid_x, data.valid_y);
  write_labeled(dir / "test.csv", data.features, data.test_x, data.test_y);
  nlohmann::json features = nlohmann::json::array();
  for (const FeatureInfo& f : data.features) {
    nlohmann::json item = {{"name", f.name}, {"source", f.source}, {"min", f.min}, {"max", f.max}};
    if (f.category) item["category"] = *f.category;
    features.push_back(item);
  }
  const nlohmann::json doc = {{"features", features},
                              {"imputed_numeric", data.imputed_numeric},
                              {"imputed_category", data.imputed_category},
                              {"rows",
                               {{"train", data.train_x.rows()},
                                {"train_before_rebalance", data.train_rows_before_rebalance},
                                {"valid", data.valid_x.rows()},
                                {"test", data.test_x.rows()}}}};
  write_text_file(dir / "scaling.json", doc.dump(2) + "\n");
}

std::pair<Matrix, Vector> read_labeled_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  if (table.header.size() < 2 || table.header.back() != "label") {
    throw DataError(path.string() + ": last column must be \"label\"");
  }
  if (table.rows.empty()) throw DataError(path.string() + ": no data rows");
  const auto n = static_cast<Eigen::Index>(table.header.size() - 1);
  Matrix x(static_cast<Eigen::Index>(table.rows.size()), n);
  Vector y(static_cast<Eigen::Index>(table.rows.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (static_cast<Eigen::Index>(row.size()) != n + 1) {
      throw DataError(path.string() + ": wrong field count in data row " + std::to_string(r + 1));
    }
    for (Eigen::Index c = 0; c < n; ++c) x(static_cast<Eigen::Index>(r), c) = parse_double(row[static_cast<std::size_t>(c)], path.string());
    const double label = parse_double(row.back(), path.string());
    if (label != 0.0 && label != 1.0) throw DataError(path.string() + ": non-binary label in data row " + std::to_string(r + 1));
    y[static_cast<Eigen::Index>(r)] = label;
  }
  return {std::move(x), std::move(y)};
}

}  // namespace inet
