#include "doctest.h"
#include "inet/lambdanet.hpp"
#include "oracles.hpp"

using namespace inet;

TEST_CASE("theta sizes") {
  CHECK(lambda_theta_size(2) == 513);
  CHECK(lambda_theta_size(9) == 1409);
  CHECK(lambda_theta_size(2, 3) == 13);
  CHECK(flatten_params(lambda_architecture(9, 128, 1)).size() == 1409);
}

TEST_CASE("flatten and unflatten are inverse") {
  const DenseNet net = lambda_architecture(3, 128, 5);
  const Vector theta = flatten_params(net);
  const DenseNet back = unflatten_params(theta, 3);
  CHECK(flatten_params(back) == theta);
  CHECK_THROWS(unflatten_params(Vector::Zero(10), 3));
}

TEST_CASE("split_rows partitions every row") {
  const RowSplit s = split_rows(1000, 0.1, 0.1, 3);
  CHECK(s.valid.size() == 100);
  CHECK(s.test.size() == 100);
  CHECK(s.train.size() == 800);
  std::vector<int> seen(1000, 0);
  for (const auto* part : {&s.train, &s.valid, &s.test}) {
    for (Eigen::Index r : *part) ++seen[static_cast<std::size_t>(r)];
  }
  for (int c : seen) CHECK(c == 1);
  CHECK_THROWS_AS(split_rows(10, 0.6, 0.5, 1), ConfigError);
}

TEST_CASE("a threshold task is learned") {
  Matrix x(1000, 1);
  Vector y(1000);
  for (Eigen::Index i = 0; i < 1000; ++i) {
    x(i, 0) = (static_cast<double>(i) + 0.5) / 1000.0;
    y[i] = x(i, 0) < 0.5 ? 0.0 : 1.0;
  }
  LambdaConfig cfg;
  cfg.epochs = 300;
  const LambdaNet net = train_lambda_net(x, y, split_rows(1000, 0.1, 0.0, 2), cfg, 11);
  CHECK(net.train_accuracy >= 0.99);
  CHECK(net.theta == net.net.flatten());
}

TEST_CASE("constant labels give the majority class everywhere") {
  Matrix x = Matrix::Random(200, 2).cwiseAbs();
  Vector y = Vector::Ones(200);
  LambdaConfig cfg;
  cfg.epochs = 50;
  const LambdaNet net = train_lambda_net(x, y, split_rows(200, 0.1, 0.0, 2), cfg, 4);
  CHECK(round_half_up(predict_lambda(net, x)).isOnes());
}

TEST_CASE("prediction matches the dense forward pass") {
  LambdaNet lambda;
  lambda.net = lambda_architecture(2, 128, 9);
  lambda.theta = lambda.net.flatten();
  const Matrix x = Matrix::Random(20, 2).cwiseAbs();
  const Vector p = predict_lambda(lambda, x);
  CHECK((p - lambda.net.forward(x).col(0)).norm() == 0.0);
  const double row[] = {x(3, 0), x(3, 1)};
  CHECK(predict_lambda(lambda, row) == p[3]);
  const double wrong[] = {0.1, 0.2, 0.3};
  CHECK_THROWS_AS(predict_lambda(lambda, wrong), DataError);

  LambdaNet zero;
  zero.net = unflatten_params(Vector::Zero(513), 2);
  zero.theta = Vector::Zero(513);
  CHECK(predict_lambda(zero, row) == 0.5);
}

TEST_CASE("half-up rounding") {
  Vector p(4);
  p << 0.49, 0.5, 0.51, 0.0;
  Vector r(4);
  r << 0, 1, 1, 0;
  CHECK(round_half_up(p) == r);
}

TEST_CASE("training is deterministic and shared init starts from one point") {
  const SyntheticDataset ds = generate_dataset(2, 300, 5.0, 21);
  LambdaConfig cfg;
  cfg.epochs = 20;
  const LambdaNet a = train_lambda_net(ds, cfg, 5);
  const LambdaNet b = train_lambda_net(ds, cfg, 5);
  CHECK(a.theta == b.theta);
  cfg.epochs = 1;
  cfg.learning_rate = 1e-12;
  const LambdaNet c = train_lambda_net(ds, cfg, 5, "", 777);
  const LambdaNet d = train_lambda_net(ds, cfg, 6, "", 777);
  CHECK((c.theta - d.theta).cwiseAbs().maxCoeff() < 1e-8);
  const LambdaNet e = train_lambda_net(ds, cfg, 6);
  CHECK((c.theta - e.theta).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("small corpus build, persistence and filter") {
  CorpusSpec spec;
  spec.count_train = 10;
  spec.count_valid = 2;
  spec.count_test = 1;
  spec.n = 2;
  spec.m = 500;
  spec.master_seed = 3;
  spec.lambda.epochs = 20;
  const LambdaCorpus corpus = build_corpus(spec);
  CHECK(corpus.entries.size() == 13);
  CHECK(corpus.split(CorpusSplit::train).size() == 10);
  CHECK(corpus.split(CorpusSplit::valid).size() == 2);
  CHECK(corpus.split(CorpusSplit::test).size() == 1);
  for (const CorpusEntry& e : corpus.entries) {
    CHECK(e.lambda.theta.size() == 513);
    CHECK_FALSE(is_linearly_separable(e.dataset));
    CHECK(e.lambda.dataset_ref == e.id);
  }
  const auto dir = oracle::temp_dir("corpus_io");
  save_corpus(corpus, dir);
  const LambdaCorpus back = load_corpus(dir);
  REQUIRE(back.entries.size() == corpus.entries.size());
  for (std::size_t i = 0; i < back.entries.size(); ++i) {
    CHECK(back.entries[i].id == corpus.entries[i].id);
    CHECK(back.entries[i].split == corpus.entries[i].split);
    CHECK(back.entries[i].lambda.theta == corpus.entries[i].lambda.theta);
    CHECK(back.entries[i].dataset.labels == corpus.entries[i].dataset.labels);
  }
  CHECK_THROWS(load_corpus(dir / "missing"));
}

TEST_CASE("lambda json round trip") {
  const SyntheticDataset ds = generate_dataset(2, 200, 5.0, 2);
  LambdaConfig cfg;
  cfg.epochs = 5;
  const LambdaNet a = train_lambda_net(ds, cfg, 1, "ds");
  const LambdaNet b = lambda_from_json(lambda_to_json(a));
  CHECK(b.theta == a.theta);
  CHECK(b.dataset_ref == "ds");
  CHECK(b.test_accuracy == a.test_accuracy);
  CHECK(b.split.test == a.split.test);
}
