#include <set>

#include "doctest.h"
#include "inet/ingest.hpp"
#include "oracles.hpp"

using namespace inet;

namespace {

// 41 rows: id, age (1 or 3, one missing), grade (ordinal), color (3 categories), outcome
CsvTable sample_table() {
  CsvTable t;
  t.header = {"id", "age", "grade", "color", "outcome"};
  const char* grades[] = {"low", "mid", "high"};
  const char* colors[] = {"red", "green", "blue"};
  for (int i = 0; i < 41; ++i) {
    const std::string age = i == 40 ? "?" : (i % 2 ? "3" : "1");
    t.rows.push_back({std::to_string(1000 + i), age, grades[i % 3], colors[(i / 2) % 3], i % 4 == 0 ? "yes" : "no"});
  }
  return t;
}

ColumnSchema sample_schema() {
  return schema_from_json(nlohmann::json::parse(R"({
    "columns": {"id": "identifier", "age": "numeric",
                "grade": {"role": "ordinal", "order": ["low", "mid", "high"]},
                "color": "categorical", "outcome": "label"},
    "label": {"positive": ["yes"]}
  })"));
}

}  // namespace

TEST_CASE("schema parsing and validation") {
  const ColumnSchema s = sample_schema();
  CHECK(s.columns.size() == 5);
  CHECK(s.label().name == "outcome");
  CHECK(s.find("grade")->order.size() == 3);
  CHECK(s.find("missing_column") == nullptr);
  CHECK_THROWS_AS(schema_from_json(nlohmann::json::parse(R"({"columns": {"a": "numeric"}})")), ConfigError);
  CHECK_THROWS_AS(schema_from_json(nlohmann::json::parse(R"({"columns": {"a": "label", "b": "label"}})")), ConfigError);
  CHECK_THROWS_AS(schema_from_json(nlohmann::json::parse(R"({"columns": {"a": "label", "b": "weird"}})")), ConfigError);
  CHECK_THROWS_AS(schema_from_json(nlohmann::json::parse(R"({"columns": {"a": "label", "b": "ordinal"}})")),
                  ConfigError);
  CHECK(to_json(schema_from_json(to_json(s))) == to_json(s));
}

TEST_CASE("preprocess drops ids, imputes, encodes and scales") {
  PreprocessConfig cfg;
  cfg.scale_before_split = true;
  const SplitDataset d = preprocess(sample_table(), sample_schema(), 7, cfg);
  CHECK(d.imputed_numeric.at("age") == doctest::Approx(2.0));
  // age, grade and three one-hot color columns
  REQUIRE(d.features.size() == 5);
  for (const auto& f : d.features) CHECK(f.source != "id");
  int onehot = 0;
  for (const auto& f : d.features) onehot += f.category.has_value();
  CHECK(onehot == 3);
  CHECK(d.valid_x.rows() == 2);
  CHECK(d.test_x.rows() == 4);
  CHECK(d.train_rows_before_rebalance == 35);
  for (const Matrix* m : {&d.train_x, &d.valid_x, &d.test_x}) {
    CHECK(m->minCoeff() >= 0.0);
    CHECK(m->maxCoeff() <= 1.0);
  }
  // 11 of 41 positives is 27%, no rebalancing expected in general; check the label set
  for (Eigen::Index i = 0; i < d.train_y.size(); ++i) CHECK((d.train_y[i] == 0.0 || d.train_y[i] == 1.0));
  const SplitDataset again = preprocess(sample_table(), sample_schema(), 7, cfg);
  CHECK(again.train_x == d.train_x);
  CHECK(again.test_y == d.test_y);
}

TEST_CASE("split sizes follow the fixed fractions") {
  CsvTable t;
  t.header = {"x", "y"};
  for (int i = 0; i < 1000; ++i) t.rows.push_back({std::to_string(i), i % 2 ? "1" : "0"});
  const ColumnSchema s = schema_from_json(nlohmann::json::parse(R"({"columns": {"x": "numeric", "y": "label"}})"));
  const SplitDataset d = preprocess(t, s, 1);
  CHECK(d.train_rows_before_rebalance == 850);
  CHECK(d.valid_x.rows() == 50);
  CHECK(d.test_x.rows() == 100);
}

TEST_CASE("train-only statistics keep test rows out") {
  CsvTable t;
  t.header = {"x", "y"};
  for (int i = 0; i < 100; ++i) t.rows.push_back({std::to_string(i), i % 2 ? "1" : "0"});
  const ColumnSchema s = schema_from_json(nlohmann::json::parse(R"({"columns": {"x": "numeric", "y": "label"}})"));
  const SplitDataset d = preprocess(t, s, 3);
  // the train extremes map to exactly 0 and 1; other splits are clipped into the box
  CHECK(d.train_x.minCoeff() == 0.0);
  CHECK(d.train_x.maxCoeff() == 1.0);
  CHECK(d.test_x.minCoeff() >= 0.0);
  CHECK(d.test_x.maxCoeff() <= 1.0);
}

TEST_CASE("structured preprocessing errors") {
  CsvTable t = sample_table();
  ColumnSchema s = sample_schema();
  t.header.push_back("extra");
  for (auto& r : t.rows) r.push_back("0");
  CHECK_THROWS_AS(preprocess(t, s, 1), DataError);

  t = sample_table();
  for (auto& r : t.rows) r[1] = "NA";
  CHECK_THROWS_AS(preprocess(t, s, 1), DataError);

  t = sample_table();
  t.rows[3][4] = "maybe";
  ColumnSchema plain = schema_from_json(nlohmann::json::parse(R"({
    "columns": {"id": "identifier", "age": "numeric",
                "grade": {"role": "ordinal", "order": ["low", "mid", "high"]},
                "color": "categorical", "outcome": "label"}})"));
  CHECK_THROWS_AS(preprocess(t, plain, 1), DataError);
}

TEST_CASE("rebalance oversamples the minority to parity") {
  Matrix x(100, 1);
  Vector y(100);
  for (Eigen::Index i = 0; i < 100; ++i) {
    x(i, 0) = static_cast<double>(i);
    y[i] = i < 20 ? 1.0 : 0.0;
  }
  Matrix rx = x;
  Vector ry = y;
  rebalance(rx, ry, 5);
  CHECK(rx.rows() == 160);
  CHECK(ry.sum() == 80.0);
  CHECK(rx.topRows(100) == x);
  for (Eigen::Index i = 100; i < 160; ++i) {
    CHECK(ry[i] == 1.0);
    CHECK(rx(i, 0) < 20.0);
    CHECK(rx(i, 0) == std::floor(rx(i, 0)));
  }
  Matrix bx = x;
  Vector by = y;
  for (Eigen::Index i = 0; i < 100; ++i) by[i] = i < 40 ? 1.0 : 0.0;
  rebalance(bx, by, 5);
  CHECK(bx.rows() == 100);
  Vector single = Vector::Zero(100);
  CHECK_THROWS_AS(rebalance(bx, single, 5), DataError);
}

TEST_CASE("split files round trip") {
  const SplitDataset d = preprocess(sample_table(), sample_schema(), 2);
  const auto dir = oracle::temp_dir("ingest_io");
  save_split_dataset(d, dir);
  for (const char* f : {"train.csv", "valid.csv", "test.csv", "scaling.json"}) CHECK(std::filesystem::exists(dir / f));
  const auto [x, y] = read_labeled_csv(dir / "test.csv");
  CHECK(x == d.test_x);
  CHECK(y == d.test_y);
  const auto scaling = nlohmann::json::parse(read_text_file(dir / "scaling.json"));
  CHECK(scaling.contains("imputed_numeric"));
}

TEST_CASE("shipped example schemas parse") {
  int count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(std::filesystem::path(INET_SOURCE_DIR) / "schemas")) {
    if (entry.path().extension() != ".json") continue;
    INFO(entry.path().string());
    const ColumnSchema s = schema_from_json(nlohmann::json::parse(read_text_file(entry.path())));
    CHECK_NOTHROW(s.label());
    ++count;
  }
  CHECK(count >= 6);
  const ColumnSchema insurance = schema_from_json(
      nlohmann::json::parse(read_text_file(std::filesystem::path(INET_SOURCE_DIR) / "schemas" / "medical_insurance.json")));
  CHECK(insurance.label_rule.threshold == 10000.0);
}
