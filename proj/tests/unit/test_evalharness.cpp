#include <fstream>
#include <sstream>

#include "doctest.h"
#include "inet/evalharness.hpp"
#include "oracles.hpp"

using namespace inet;

namespace {

FidelityRow row(std::string id, std::string method, double f, std::uint64_t seed = 0) {
  FidelityRow r;
  r.target_id = std::move(id);
  r.method = std::move(method);
  r.fidelity = f;
  r.seed = seed;
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("fidelity on probability vectors") {
  Vector lam(10), same(10), flip(10), half(10);
  for (Eigen::Index i = 0; i < 10; ++i) {
    lam[i] = i % 2 ? 0.8 : 0.1;
    same[i] = lam[i] >= 0.5 ? 0.6 : 0.4;
    flip[i] = 1.0 - same[i];
    half[i] = i < 5 ? same[i] : flip[i];
  }
  CHECK(fidelity(same, lam) == 1.0);
  CHECK(fidelity(flip, lam) == 0.0);
  CHECK(fidelity(half, lam) == 0.5);
  CHECK_THROWS_AS(fidelity(Vector::Zero(3), lam), DataError);
}

TEST_CASE("welch test against hand formulas") {
  const std::vector<double> a{0.81, 0.84, 0.79, 0.86, 0.80};
  const std::vector<double> b{0.75, 0.78, 0.74, 0.77, 0.79, 0.72, 0.76};
  auto stats = [](const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    m /= v.size();
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::pair{m, s / (v.size() - 1)};
  };
  const auto [ma, va] = stats(a);
  const auto [mb, vb] = stats(b);
  const double sa = va / a.size(), sb = vb / b.size();
  const double t = (ma - mb) / std::sqrt(sa + sb);
  const double df = (sa + sb) * (sa + sb) / (sa * sa / (a.size() - 1) + sb * sb / (b.size() - 1));
  const WelchResult r = welch_t_test(a, b);
  CHECK(r.t == doctest::Approx(t).epsilon(1e-12));
  CHECK(r.df == doctest::Approx(df).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(oracle::t_two_sided_p(t, df)).epsilon(1e-6));

  // one-element sample: only the other sample's variance counts
  const WelchResult single = welch_t_test({0.9}, b);
  CHECK(single.t == doctest::Approx((0.9 - mb) / std::sqrt(sb)).epsilon(1e-12));
  CHECK(welch_t_test({0.5, 0.5}, {0.5, 0.5}).p_value == 1.0);
  CHECK(welch_t_test({0.6, 0.6}, {0.5, 0.5}).p_value == 0.0);
}

TEST_CASE("aggregate means, population std and winners") {
  std::vector<FidelityRow> rows{row("a", "inet", 0.9)};
  for (double f : {0.70, 0.72, 0.74}) rows.push_back(row("a", "standard_uniform", f));
  for (double f : {0.88, 0.90, 0.92}) rows.push_back(row("a", "standard_normal", f));
  const auto agg = aggregate(rows);
  REQUIRE(agg.size() == 3);
  CHECK(agg[0].method == "inet");
  CHECK(agg[0].std == 0.0);
  CHECK(agg[1].mean == doctest::Approx(0.72));
  CHECK(agg[1].std == doctest::Approx(std::sqrt(0.0008 / 3.0)));
  CHECK(agg[1].count == 3);
  // inet and standard_normal tie on the mean and the test cannot separate them
  CHECK(agg[0].winner);
  CHECK(agg[2].winner);
  CHECK_FALSE(agg[1].winner);

  std::vector<FidelityRow> clear{row("b", "inet", 0.5)};
  for (double f : {0.80, 0.81, 0.82}) clear.push_back(row("b", "standard_uniform", f));
  const auto agg2 = aggregate(clear);
  CHECK_FALSE(agg2[0].winner);
  CHECK(agg2[1].winner);
  REQUIRE(agg2[0].p_value);
  CHECK(*agg2[0].p_value < 0.05);
}

TEST_CASE("benchmark row counts and aggregation from the csv") {
  CorpusSpec spec;
  spec.count_train = 2;
  spec.count_valid = 2;
  spec.count_test = 2;
  spec.n = 2;
  spec.m = 300;
  spec.master_seed = 5;
  spec.lambda.epochs = 20;
  const LambdaCorpus corpus = build_corpus(spec);
  INetTrainConfig icfg = default_inet_config(TreeFamily::standard_dt);
  icfg.architecture.hidden = {8};
  icfg.architecture.dropout = {0.0};
  icfg.depth = 2;
  const INetModel model = build_inet(TreeFamily::standard_dt, 2, 2, icfg, 1);
  const auto targets = corpus_targets(corpus);
  REQUIRE(targets.size() == 2);
  CHECK(targets[0].test_x.rows() == 30);

  BenchmarkConfig cfg;
  cfg.distill.query_count = 300;
  cfg.distill.cart.max_depth = 2;
  cfg.master_seed = 4;
  const FidelityReport report = run_benchmark(targets, {{TreeFamily::standard_dt, &model}}, cfg);
  CHECK(report.rows.size() == 62);
  for (const auto& r : report.rows) {
    CHECK(r.fidelity >= 0.0);
    CHECK(r.fidelity <= 1.0);
    CHECK_FALSE(r.wall_ms.has_value());
  }
  const auto dir = oracle::temp_dir("bench_io");
  write_report_csv(report.rows, dir / "report.csv");
  const auto back = read_report_csv(dir / "report.csv");
  REQUIRE(back.size() == report.rows.size());
  std::map<std::pair<std::string, std::string>, std::pair<double, int>> sums;
  for (const auto& r : back) {
    auto& s = sums[{r.target_id, r.method}];
    s.first += r.fidelity;
    s.second += 1;
  }
  for (const auto& a : report.aggregates) {
    const auto& s = sums.at({a.target_id, a.method});
    CHECK(a.mean == doctest::Approx(s.first / s.second).epsilon(1e-12));
    if (a.method == kInetMethod) CHECK(a.std == 0.0);
  }
  const FidelityReport again = run_benchmark(targets, {{TreeFamily::standard_dt, &model}}, cfg);
  write_report_csv(again.rows, dir / "report2.csv");
  CHECK(slurp(dir / "report.csv") == slurp(dir / "report2.csv"));
  write_aggregate_csv(report.aggregates, dir / "aggregate.csv");
  CHECK(slurp(dir / "aggregate.csv").rfind("target_id,family,method,count,mean,std,winner,p_value\n", 0) == 0);

  SweepConfig sweep;
  sweep.sizes = {100, 400};
  sweep.trials = 2;
  sweep.distill.cart.max_depth = 2;
  const auto sweep_rows = sample_size_sweep(targets, sweep);
  CHECK(sweep_rows.size() == 2 * 2 * 3);
  const auto means = sweep_means(sweep_rows);
  CHECK(means.size() == 6);
}

TEST_CASE("boundary grids") {
  StandardTree stump;
  stump.depth = 1;
  stump.n = 2;
  stump.features = {0};
  stump.splits = {0.5};
  stump.leaf_probs = {0.1, 0.9};
  const BoundaryGrid g = boundary_grid(TreeModel{stump}, 100);
  CHECK(g.labels.size() == 10000);
  CHECK(g.coords.front() == 0.0);
  CHECK(g.coords.back() == 1.0);
  CHECK(g.labels[0] == 0);
  CHECK(g.labels[99] == 1);       // x0 = 1 on the first row
  CHECK(g.labels[99 * 100] == 0); // x1 = 1, x0 = 0
  const std::string svg = grid_svg(g, 2);
  CHECK(svg.find("<svg") != std::string::npos);
  StandardTree wide = stump;
  wide.n = 3;
  CHECK_THROWS_AS(boundary_grid(TreeModel{wide}, 10), DataError);
  CHECK_THROWS_AS(boundary_grid(TreeModel{stump}, 1), ConfigError);
}
