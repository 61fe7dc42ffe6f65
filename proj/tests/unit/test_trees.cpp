#include <random>

#include "doctest.h"
#include "inet/trees.hpp"
#include "oracles.hpp"

using namespace inet;

namespace {

StandardTree sample_tree() {
  // root: x0 < 0.5; left: x1 < 0.3; right: x1 < 0.7
  StandardTree t;
  t.depth = 2;
  t.n = 2;
  t.features = {0, 1, 1};
  t.splits = {0.5, 0.3, 0.7};
  t.leaf_probs = {0.1, 0.9, 0.2, 0.8};
  return t;
}

std::vector<double> random_theta(const ThetaLayout& layout, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> theta(layout.total);
  for (double& v : theta) v = u(rng);
  return theta;
}

}  // namespace

TEST_CASE("parameter counts and layouts") {
  CHECK(param_count(TreeFamily::standard_dt, 2, 2) == 16);
  CHECK(param_count(TreeFamily::univariate_sdt, 2, 2) == 23);
  CHECK(param_count(TreeFamily::standard_sdt, 2, 2) == 17);
  CHECK(param_count(TreeFamily::standard_dt, 23, 3) == 7 * 23 * 2 + 8);
  const ThetaLayout l = ThetaLayout::make(TreeFamily::standard_sdt, 2, 2);
  CHECK(l.identifiers == ThetaLayout::kAbsent);
  CHECK(l.filters == 0);
  CHECK(l.biases == 6);
  CHECK(l.leaves == 9);
  for (TreeFamily f : {TreeFamily::standard_dt, TreeFamily::univariate_sdt, TreeFamily::standard_sdt}) {
    CHECK(family_from_string(to_string(f)) == f);
  }
}

TEST_CASE("hard evaluation follows the left-is-true convention") {
  const TreeModel tree = sample_tree();
  const double a[] = {0.2, 0.1};
  const double b[] = {0.2, 0.5};
  const double c[] = {0.9, 0.6};
  const double d[] = {0.9, 0.75};
  const double e[] = {0.5, 0.3};  // equal to the split goes right
  CHECK(evaluate(tree, a) == 0.1);
  CHECK(evaluate(tree, b) == 0.9);
  CHECK(evaluate(tree, c) == 0.2);
  CHECK(evaluate(tree, d) == 0.8);
  CHECK(evaluate(tree, e) == 0.2);
}

TEST_CASE("hard evaluation is piecewise constant") {
  const StandardTree tree = sample_tree();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    double x[] = {u(rng), u(rng)};
    const double before = eval_standard(tree, x);
    double y[] = {x[0] + 1e-4, x[1] - 1e-4};
    const bool crosses = (x[0] < 0.5) != (y[0] < 0.5) || (x[1] < 0.3) != (y[1] < 0.3) || (x[1] < 0.7) != (y[1] < 0.7);
    if (!crosses) CHECK(eval_standard(tree, y) == before);
  }
}

TEST_CASE("decoding picks the argmax identifier with low-index ties") {
  const ThetaLayout l = ThetaLayout::make(TreeFamily::standard_dt, 2, 1);
  std::vector<double> theta{0.5, 0.5, 0.2, 0.7, 0.6, 0.4};
  StandardTree t = decode_standard(theta, l);
  CHECK(t.features[0] == 0);
  CHECK(t.splits[0] == 0.2);
  theta[0] = 0.3;
  theta[1] = 0.7;
  t = decode_standard(theta, l);
  CHECK(t.features[0] == 1);
  CHECK(t.splits[0] == 0.7);
  // monotone rescaling of the identifier scores changes nothing
  std::vector<double> scaled = theta;
  scaled[0] = std::exp(3.0 * theta[0]);
  scaled[1] = std::exp(3.0 * theta[1]);
  CHECK(decode_standard(scaled, l).features == t.features);
}

TEST_CASE("encode inverts decode for every family") {
  std::mt19937_64 rng(1);
  const StandardTree s = sample_tree();
  CHECK(tree_to_json(decode(encode(s), ThetaLayout::make(TreeFamily::standard_dt, 2, 2))) == tree_to_json(s));
  const ThetaLayout sl = ThetaLayout::make(TreeFamily::standard_sdt, 3, 2);
  const SoftTree soft = decode_soft(random_theta(sl, rng), sl);
  CHECK(tree_to_json(decode(encode(soft), sl)) == tree_to_json(soft));
  const ThetaLayout ul = ThetaLayout::make(TreeFamily::univariate_sdt, 3, 2);
  const UnivariateSoftTree uni = decode_univariate(random_theta(ul, rng), ul);
  CHECK(tree_to_json(decode(encode(uni), ul)) == tree_to_json(uni));
}

TEST_CASE("soft trees: path probabilities sum to one") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const ThetaLayout l = ThetaLayout::make(TreeFamily::standard_sdt, 3, 3);
  for (int trial = 0; trial < 50; ++trial) {
    const SoftTree t = decode_soft(random_theta(l, rng), l);
    const double x[] = {u(rng), u(rng), u(rng)};
    const auto probs = leaf_path_probabilities(t, x);
    double sum = 0.0;
    for (double p : probs) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    double mixed = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
      mixed += probs[k] * leaf_class1(t.leaf_logits(static_cast<Eigen::Index>(k), 0),
                                      t.leaf_logits(static_cast<Eigen::Index>(k), 1));
    }
    CHECK(eval_soft(t, x, false) == doctest::Approx(mixed).epsilon(1e-12));
  }
}

TEST_CASE("soft max-path routing") {
  SoftTree t;
  t.depth = 1;
  t.n = 1;
  t.filters = Matrix::Ones(1, 1);
  t.biases = Vector::Constant(1, -0.5);
  t.leaf_logits = Matrix(2, 2);
  t.leaf_logits << 2.0, 0.0, 0.0, 2.0;
  const double left[] = {0.2};
  const double right[] = {0.8};
  const double tie[] = {0.5};
  CHECK(eval_soft(t, left, true) == doctest::Approx(leaf_class1(2.0, 0.0)));
  CHECK(eval_soft(t, right, true) == doctest::Approx(leaf_class1(0.0, 2.0)));
  CHECK(eval_soft(t, tie, true) == doctest::Approx(leaf_class1(2.0, 0.0)));
}

TEST_CASE("univariate trees ignore unused coordinates") {
  std::mt19937_64 rng(3);
  const ThetaLayout l = ThetaLayout::make(TreeFamily::univariate_sdt, 4, 1);
  const UnivariateSoftTree t = decode_univariate(random_theta(l, rng), l);
  double x[] = {0.1, 0.2, 0.3, 0.4};
  const double before = eval_univariate(t, x, false);
  for (Eigen::Index f = 0; f < 4; ++f) {
    if (f == t.features[0]) continue;
    x[f] += 0.37;
  }
  CHECK(eval_univariate(t, x, false) == before);
  const SoftTree dense = to_soft_tree(t);
  CHECK(eval_soft(dense, x, false) == doctest::Approx(eval_univariate(t, x, false)).epsilon(1e-12));
}

TEST_CASE("relaxed standard evaluation converges to the hard tree") {
  const StandardTree tree = sample_tree();
  const ThetaLayout l = ThetaLayout::make(TreeFamily::standard_dt, 2, 2);
  const std::vector<double> theta = encode(tree);
  const double x[] = {0.1, 0.1};
  CHECK(eval_standard_soft(theta, l, x, 200.0) == doctest::Approx(eval_standard(tree, x)).epsilon(1e-6));
}

TEST_CASE("relaxed standard evaluation gradient") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const ThetaLayout l = ThetaLayout::make(TreeFamily::standard_dt, 2, 2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> theta(l.total);
    for (double& v : theta) v = u(rng);
    const double x[] = {u(rng), u(rng)};
    std::vector<double> grad(l.total, 0.0);
    eval_standard_soft(theta, l, x, 25.0, grad);
    const auto numeric = oracle::numeric_gradient(
        [&](const std::vector<double>& t) { return eval_standard_soft(t, l, x, 25.0); }, theta);
    CHECK(oracle::relative_error(grad, numeric) < 1e-6);
  }
}

TEST_CASE("json and dot export") {
  const TreeModel tree = sample_tree();
  const auto doc = tree_to_json(tree);
  CHECK(doc.at("format_version") == kTreeFormatVersion);
  CHECK(tree_to_json(tree_from_json(doc)) == doc);
  StandardTree stump;
  stump.depth = 1;
  stump.n = 1;
  stump.features = {0};
  stump.splits = {0.4};
  stump.leaf_probs = {0.2, 0.7};
  const std::string dot = to_dot(stump);
  CHECK(dot.rfind("digraph", 0) == 0);
  CHECK(dot.find("f0 < 0.4") != std::string::npos);
  CHECK(dot.find("true") != std::string::npos);
  CHECK(dot.find("false") != std::string::npos);
  std::size_t edges = 0;
  for (std::size_t pos = dot.find("->"); pos != std::string::npos; pos = dot.find("->", pos + 2)) ++edges;
  CHECK(edges == 2);
  auto broken = doc;
  broken["family"] = "oblique";
  CHECK_THROWS(tree_from_json(broken));
}

TEST_CASE("invalid trees are rejected") {
  StandardTree t = sample_tree();
  t.splits.pop_back();
  CHECK_THROWS(t.validate());
  t = sample_tree();
  t.features[0] = 5;
  CHECK_THROWS(t.validate());
}
