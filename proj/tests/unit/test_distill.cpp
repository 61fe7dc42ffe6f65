#include <random>

#include "doctest.h"
#include "inet/distill.hpp"
#include "inet/evalharness.hpp"
#include "oracles.hpp"

using namespace inet;

namespace {

double train_accuracy(const StandardTree& tree, const Matrix& x, std::span<const int> y) {
  int hits = 0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double row[] = {x(r, 0), x(r, 1)};
    hits += (eval_standard(tree, std::span<const double>(row, static_cast<std::size_t>(x.cols()))) >= 0.5) ==
            (y[static_cast<std::size_t>(r)] == 1);
  }
  return static_cast<double>(hits) / static_cast<double>(x.rows());
}

LambdaNet threshold_lambda() {
  Matrix x(2000, 2);
  Vector y(2000);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Eigen::Index i = 0; i < 2000; ++i) {
    x(i, 0) = u(rng);
    x(i, 1) = u(rng);
    y[i] = x(i, 0) < 0.5 ? 0.0 : 1.0;
  }
  LambdaConfig cfg;
  cfg.epochs = 200;
  return train_lambda_net(x, y, split_rows(2000, 0.1, 0.1, 1), cfg, 3);
}

std::vector<double> sdt_grad_vector(const SdtParams& g) { return g.flatten(); }

}  // namespace

TEST_CASE("gini values") {
  CHECK(gini(2, 4) == doctest::Approx(0.5));
  CHECK(gini(0, 7) == 0.0);
  CHECK(gini(7, 7) == 0.0);
  CHECK(gini(1, 4) == doctest::Approx(0.375));
}

TEST_CASE("pure data and xor corners") {
  Matrix x(4, 2);
  x << 0, 0, 1, 1, 0, 1, 1, 0;
  const std::vector<int> zeros(4, 0);
  const StandardTree pure = cart_fit(x, zeros);
  for (double p : pure.leaf_probs) CHECK(p == doctest::Approx(1e-7));
  CHECK(train_accuracy(pure, x, zeros) == 1.0);
  CartConfig two;
  two.max_depth = 2;
  const std::vector<int> y{0, 0, 1, 1};
  const StandardTree tree = cart_fit(x, y, two);
  CHECK(tree.depth == 2);
  CHECK(train_accuracy(tree, x, y) == 1.0);
  CHECK(tree.splits[0] == 0.5);
  CHECK_THROWS(cart_fit(Matrix(0, 2), std::vector<int>{}));
}

TEST_CASE("root split agrees with an exhaustive search") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> grid(0, 9);
  for (int trial = 0; trial < 1000; ++trial) {
    const int rows = 2 + trial % 49;
    const int cols = 1 + trial % 4;
    Matrix x(rows, cols);
    std::vector<int> y(static_cast<std::size_t>(rows));
    std::vector<std::vector<double>> raw;
    for (int r = 0; r < rows; ++r) {
      std::vector<double> row;
      for (int c = 0; c < cols; ++c) {
        x(r, c) = grid(rng) / 10.0;  // coarse grid so ties happen
        row.push_back(x(r, c));
      }
      raw.push_back(row);
      y[static_cast<std::size_t>(r)] = grid(rng) < 5;
    }
    std::vector<Eigen::Index> all(static_cast<std::size_t>(rows));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    const SplitCandidate got = best_split(x, y, all);
    const oracle::Split want = oracle::brute_force_stump(raw, y);
    REQUIRE(got.valid == want.valid);
    if (!want.valid) continue;
    CHECK(got.impurity == doctest::Approx(want.impurity).epsilon(1e-12));
    CHECK(got.feature == want.feature);
    CHECK(got.threshold == doctest::Approx(want.threshold).epsilon(1e-12));
  }
}

TEST_CASE("deeper trees never fit worse") {
  const SyntheticDataset ds = generate_dataset(3, 400, 5.0, 12);
  double last = 0.0;
  for (int depth = 1; depth <= 5; ++depth) {
    CartConfig cfg;
    cfg.max_depth = depth;
    const StandardTree tree = cart_fit(ds.features, ds.labels, cfg);
    int hits = 0;
    for (Eigen::Index r = 0; r < ds.m(); ++r) {
      const double row[] = {ds.features(r, 0), ds.features(r, 1), ds.features(r, 2)};
      hits += (eval_standard(tree, row) >= 0.5) == (ds.labels[static_cast<std::size_t>(r)] == 1);
    }
    const double acc = static_cast<double>(hits) / static_cast<double>(ds.m());
    CHECK(acc >= last);
    last = acc;
  }
}

TEST_CASE("cart config validation") {
  CartConfig cfg;
  cfg.max_depth = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.criterion = "entropy";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("univariate mask limits") {
  Matrix w(1, 2);
  w << 3.0, 0.1;
  SDTTrainConfig cfg;
  cfg.univariate = true;
  cfg.beta2 = 200.0;
  Matrix eff = effective_filters(w, cfg);
  CHECK(eff(0, 0) == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(std::fabs(eff(0, 1)) < 1e-9);
  w << 1.5, 0.05;
  cfg.beta2 = 0.0;
  eff = effective_filters(w, cfg);
  CHECK(eff(0, 0) == doctest::Approx(0.75));
  CHECK(eff(0, 1) == doctest::Approx(0.025));
  cfg.univariate = false;
  CHECK(effective_filters(w, cfg) == w);
}

TEST_CASE("sdt objective gradient matches differences") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (bool univariate : {false, true}) {
    for (int trial = 0; trial < 10; ++trial) {
      SDTTrainConfig cfg;
      cfg.depth = 2;
      cfg.univariate = univariate;
      cfg.beta2 = 3.0;
      cfg.beta = 1.5;
      cfg.lambda_reg = 0.05;
      SdtParams params = SdtParams::zeros(2, 3);
      std::vector<double> flat = params.flatten();
      for (double& v : flat) v = u(rng);
      params.assign(flat);
      Matrix x = (Matrix::Random(12, 3).array() + 1.0) / 2.0;
      Vector t(12);
      for (Eigen::Index i = 0; i < 12; ++i) t[i] = i % 3 == 0;
      SdtParams grad = SdtParams::zeros(2, 3);
      sdt_objective(params, x, t, cfg, &grad);
      auto f = [&](const std::vector<double>& v) {
        SdtParams p = params;
        p.assign(v);
        return sdt_objective(p, x, t, cfg);
      };
      CHECK(oracle::relative_error(sdt_grad_vector(grad), oracle::numeric_gradient(f, flat)) < 1e-6);
    }
  }
}

TEST_CASE("sdt learns a one-dimensional threshold") {
  Matrix x(1000, 1);
  Vector y(1000);
  for (Eigen::Index i = 0; i < 1000; ++i) {
    x(i, 0) = (static_cast<double>(i) + 0.5) / 1000.0;
    y[i] = x(i, 0) > 0.5 ? 1.0 : 0.0;
  }
  SDTTrainConfig cfg;
  cfg.depth = 1;
  SdtHistory history;
  const TreeModel tree = sdt_fit(x, y, cfg, 4, &history);
  CHECK(family_of(tree) == TreeFamily::standard_sdt);
  const Vector pred = evaluate(tree, x);
  int hits = 0;
  for (Eigen::Index i = 0; i < 1000; ++i) hits += (pred[i] >= 0.5) == (y[i] == 1.0);
  CHECK(hits >= 980);
  REQUIRE(history.train_loss.size() >= 10);
  CHECK(history.train_loss[9] < history.train_loss[0]);

  cfg.univariate = true;
  const TreeModel uni = sdt_fit(x, y, cfg, 4);
  CHECK(family_of(uni) == TreeFamily::univariate_sdt);
}

TEST_CASE("distilling a threshold network") {
  const LambdaNet lambda = threshold_lambda();
  REQUIRE(lambda.test_accuracy >= 0.98);
  DistillConfig cfg;
  const DistillResult a = distill(lambda, TreeFamily::standard_dt, QueryStrategy::standard_uniform, cfg, 9);
  Rng rng(100);
  const Matrix fresh = sample_query_points(QueryStrategy::standard_uniform, 5000, 2, 5.0, rng).points;
  CHECK(fidelity(a.tree, lambda, fresh) >= 0.99);
  CHECK(a.fidelity_on_query >= 0.99);
  const DistillResult b = distill(lambda, TreeFamily::standard_dt, QueryStrategy::standard_uniform, cfg, 9);
  CHECK(tree_to_json(a.tree) == tree_to_json(b.tree));
  cfg.query_count = 200;
  const DistillResult m1 = distill(lambda, TreeFamily::standard_dt, QueryStrategy::multi_distribution, cfg, 1);
  const DistillResult m2 = distill(lambda, TreeFamily::standard_dt, QueryStrategy::multi_distribution, cfg, 2);
  CHECK(m1.queries != m2.queries);
}

TEST_CASE("distill config json round trip") {
  DistillConfig cfg;
  cfg.query_count = 123;
  cfg.cart.max_depth = 4;
  cfg.sdt.univariate = true;
  cfg.sdt.beta2 = 7.0;
  const auto doc = to_json(cfg);
  CHECK(to_json(distill_config_from_json(doc)) == doc);
}
