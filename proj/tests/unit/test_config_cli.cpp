#include <sstream>

#include "doctest.h"
#include "inet/cli.hpp"
#include "inet/config.hpp"
#include "inet/csv.hpp"
#include "oracles.hpp"

using namespace inet;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "inet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = command_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("defaults and presets") {
  const RunConfig def = resolve_config(nlohmann::json::object());
  CHECK(def.corpus.count_train == 9000);
  CHECK(def.inet.architecture.hidden == std::vector<Eigen::Index>{1792, 512, 512});
  CHECK(def.inet.epochs == 500);
  CHECK(def.distill.query_count == 10000);
  CHECK(def.benchmark.trials == 10);
  const RunConfig desk = resolve_config(nlohmann::json::object(), "desk");
  CHECK(desk.preset == "desk");
  CHECK(desk.corpus.count_train == 500);
  CHECK(desk.corpus.m == 1000);
  CHECK_THROWS_AS(resolve_config(nlohmann::json::object(), "huge"), ConfigError);
}

TEST_CASE("unknown and invalid fields name their path") {
  const auto unknown = message_of([] { resolve_config(nlohmann::json::parse(R"({"inet": {"lr": 0.1}})")); });
  CHECK(unknown.find("config.inet.lr") != std::string::npos);
  const auto bad = message_of([] { resolve_config(nlohmann::json::parse(R"({"inet": {"learning_rate": -1}})")); });
  CHECK(bad.find("inet.learning_rate") != std::string::npos);
  CHECK_THROWS_AS(resolve_config(nlohmann::json::parse(R"({"data": {"n": "two"}})")), ConfigError);
  CHECK_THROWS_AS(resolve_config(nlohmann::json::parse(R"({"paths": {"corpus": "/no/such/dir"}})")), ConfigError);
  CHECK_THROWS_AS(resolve_config(nlohmann::json::array()), ConfigError);
}

TEST_CASE("family switch applies that family's trunk") {
  const RunConfig c = resolve_config(nlohmann::json::parse(R"({"inet": {"family": "univariate_sdt"}})"));
  CHECK(c.inet_family == TreeFamily::univariate_sdt);
  CHECK(c.inet.architecture.hidden == std::vector<Eigen::Index>{4096, 2048});
  CHECK(c.inet.architecture.activation == Activation::swish);
  const RunConfig d = resolve_config(
      nlohmann::json::parse(R"({"inet": {"family": "standard_sdt", "hidden": [10], "dropout": [0.1]}})"));
  CHECK(d.inet.architecture.hidden == std::vector<Eigen::Index>{10});
  CHECK(d.inet.architecture.activation == Activation::swish);
}

TEST_CASE("resolved config round trips") {
  const RunConfig c = resolve_config(nlohmann::json::parse(R"({"seed": 17, "cart": {"max_depth": 4}})"), "desk");
  const nlohmann::json doc = resolved_json(c);
  CHECK(resolved_json(resolve_config(doc)) == doc);
  CHECK(dump_json(doc).back() == '\n');
  CHECK(c.distill.cart.max_depth == 4);
  CHECK(c.seed == 17);
}

TEST_CASE("exit codes") {
  CHECK(exit_code_for(ConfigError("x")) == kExitConfig);
  CHECK(exit_code_for(DataError("x")) == kExitData);
  CHECK(exit_code_for(NumericalError("x")) == kExitNumerical);
  CHECK(run({"--help"}).code == 0);
  CHECK(run({"no-such-command"}).code == kExitConfig);
  CHECK(run({"gen-data", "--n", "two"}).code == kExitConfig);
  const auto dir = oracle::temp_dir("cli_codes");
  write_text_file(dir / "bad.json", R"({"data": {"m": 1}})");
  const Run bad = run({"gen-data", "--config", (dir / "bad.json").string(), "--out", (dir / "g").string()});
  CHECK(bad.code == kExitConfig);
  CHECK(bad.err.rfind("error: kind=config message=", 0) == 0);
  write_text_file(dir / "broken.csv", "f0,label\n0.1,0\nzzz,1\n");
  const Run data = run({"train-lambda", "--data", (dir / "broken.csv").string(), "--out", (dir / "t").string()});
  CHECK(data.code == kExitData);
  CHECK(data.err.find("kind=data") != std::string::npos);
}

TEST_CASE("small pipeline through the command layer") {
  const auto dir = oracle::temp_dir("cli_pipeline");
  write_text_file(dir / "cfg.json", R"({"lambda": {"epochs": 30}, "distill": {"query_count": 500},
                                        "cart": {"max_depth": 2}})");
  const std::string cfg = (dir / "cfg.json").string();
  const Run gen = run({"gen-data", "--config", cfg, "--n", "2", "--m", "300", "--seed", "3", "--out", (dir / "gen").string()});
  REQUIRE(gen.code == 0);
  CHECK(std::filesystem::exists(dir / "gen" / "dataset.csv"));
  CHECK(std::filesystem::exists(dir / "gen" / "resolved-config.json"));

  const Run lam = run({"train-lambda", "--config", cfg, "--data", (dir / "gen" / "dataset.csv").string(), "--seed", "3",
                       "--out", (dir / "lam").string()});
  REQUIRE(lam.code == 0);
  CHECK(std::filesystem::exists(dir / "lam" / "metrics.json"));

  const Run dist = run({"distill", "--config", cfg, "--lambda", (dir / "lam" / "lambda.json").string(), "--strategy",
                        "standard_uniform", "--seed", "3", "--out", (dir / "dist").string()});
  REQUIRE(dist.code == 0);
  const std::string trial = read_text_file(dir / "dist" / "trial.csv");
  CHECK(trial.find("standard_uniform") != std::string::npos);

  const Run dot = run({"export-tree", "--tree", (dir / "dist" / "tree.json").string(), "--format", "dot"});
  REQUIRE(dot.code == 0);
  CHECK(dot.out.rfind("digraph", 0) == 0);

  const Run grid = run({"boundary", "--lambda", (dir / "lam" / "lambda.json").string(), "--resolution", "20", "--svg",
                        "--out", (dir / "grid").string()});
  REQUIRE(grid.code == 0);
  CHECK(std::filesystem::exists(dir / "grid" / "grid.svg"));

  // rerun with the same config and seed reproduces the tree byte for byte
  const Run again = run({"distill", "--config", cfg, "--lambda", (dir / "lam" / "lambda.json").string(), "--strategy",
                         "standard_uniform", "--seed", "3", "--out", (dir / "dist2").string()});
  REQUIRE(again.code == 0);
  CHECK(read_text_file(dir / "dist" / "tree.json") == read_text_file(dir / "dist2" / "tree.json"));
  auto first = nlohmann::json::parse(read_text_file(dir / "dist" / "resolved-config.json"));
  auto second = nlohmann::json::parse(read_text_file(dir / "dist2" / "resolved-config.json"));
  CHECK(first.at("output_dir") != second.at("output_dir"));
  for (const char* key : {"output_dir", "command"}) {
    first.erase(key);
    second.erase(key);
  }
  CHECK(first == second);
}
