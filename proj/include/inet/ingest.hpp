#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "inet/common.hpp"
#include "inet/csv.hpp"
#include "json.hpp"

namespace inet {

enum class ColumnRole { identifier, numeric, ordinal, categorical, nominal, label };

std::string_view to_string(ColumnRole role);
ColumnRole column_role_from_string(std::string_view name);

struct ColumnSpec {
  std::string name;
  ColumnRole role = ColumnRole::numeric;
  std::vector<std::string> order;  // ordinal only: lowest first
};

/// How raw label values become {0,1}. With neither field set the column must hold exactly
/// two distinct values; "0"/"1" map directly, otherwise the lexicographically larger is 1.
struct LabelRule {
  std::vector<std::string> positive;  // values mapped to 1
  std::optional<double> threshold;    // numeric label > threshold -> 1
};

struct ColumnSchema {
  std::vector<ColumnSpec> columns;  // in declaration order
  LabelRule label_rule;
  std::vector<std::string> missing{"", "?", "NA", "na", "NaN", "nan", "null", "NULL"};

  const ColumnSpec* find(const std::string& name) const;
  const ColumnSpec& label() const;
  void validate() const;
};

/// {"columns": {"age": "numeric", "grade": {"role": "ordinal", "order": [...]}, ...},
///  "label": {"positive": [...]} | {"threshold": x}, "missing": [...]}
ColumnSchema schema_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ColumnSchema& schema);

struct PreprocessConfig {
  double valid_fraction = 0.05;
  double test_fraction = 0.10;
  double rebalance_below = 0.25;
  bool scale_before_split = false;  // statistics over every row instead of the train split
};

/// Per output feature: source column and, for one-hot features, the category.
struct FeatureInfo {
  std::string name;
  std::string source;
  std::optional<std::string> category;
  double min = 0.0;
  double max = 0.0;
};

struct SplitDataset {
  std::vector<FeatureInfo> features;
  Matrix train_x, valid_x, test_x;
  Vector train_y, valid_y, test_y;
  std::size_t train_rows_before_rebalance = 0;
  std::map<std::string, double> imputed_numeric;
  std::map<std::string, std::string> imputed_category;
};

/// Random oversampling of the minority class with replacement up to parity when its share
/// is below `below`; copies are appended after the original rows.
void rebalance(Matrix& x, Vector& y, std::uint64_t seed, double below = 0.25);

SplitDataset preprocess(const CsvTable& table, const ColumnSchema& schema, std::uint64_t seed,
                        const PreprocessConfig& config = {});

/// train.csv, valid.csv, test.csv (feature columns then "label") and scaling.json.
void save_split_dataset(const SplitDataset& data, const std::filesystem::path& dir);

/// Features and labels from a CSV whose last column is "label".
std::pair<Matrix, Vector> read_labeled_csv(const std::filesystem::path& path);

}  // namespace inet
