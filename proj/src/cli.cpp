#include "inet/cli.hpp"

#include <filesystem>
#include <sstream>

#include "CLI11.hpp"
#include "inet/config.hpp"
#include "inet/csv.hpp"
#include "inet/datagen.hpp"
#include "inet/distill.hpp"
#include "inet/evalharness.hpp"
#include "inet/inet.hpp"
#include "inet/ingest.hpp"
#include "inet/lambdanet.hpp"
#include "inet/trees.hpp"

namespace fs = std::filesystem;

namespace inet {

int exit_code_for(const Error& error) {
  switch (error.kind()) {
    case Error::Kind::config:
      return kExitConfig;
    case Error::Kind::data:
      return kExitData;
    case Error::Kind::numerical:
      return kExitNumerical;
  }
  return kExitData;
}

namespace {

struct Common {
  std::string config;
  std::string preset;
  std::string out;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* sub, Common& c, bool with_out = true) {
  sub->add_option("--config", c.config, "Run configuration JSON")->check(CLI::ExistingFile);
  sub->add_option("--preset", c.preset, "Defaults preset: default or desk");
  c.seed_opt = sub->add_option("--seed", c.seed, "Master seed (overrides the config)");
  if (with_out) sub->add_option("--out", c.out, "Output directory (overrides the config)");
}

nlohmann::json given_flags(const CLI::App* sub) {
  nlohmann::json flags = nlohmann::json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->count() == 0 || opt->get_name() == "--help") continue;
    const auto results = opt->results();
    std::string name = opt->get_name();
    while (!name.empty() && name.front() == '-') name.erase(name.begin());
    flags[name] = results.size() == 1 ? nlohmann::json(results.front()) : nlohmann::json(results);
  }
  return flags;
}

RunConfig load_run(const Common& c, nlohmann::json overrides, const CLI::App* sub) {
  nlohmann::json doc = nlohmann::json::object();
  if (!c.config.empty()) {
    try {
      doc = nlohmann::json::parse(read_text_file(c.config));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(c.config + ": invalid JSON: " + e.what());
    }
    if (!doc.is_object()) throw ConfigError(c.config + ": top level must be a JSON object");
  }
  if (c.seed_opt != nullptr && c.seed_opt->count() > 0) overrides["seed"] = c.seed;
  if (!c.out.empty()) overrides["output_dir"] = c.out;
  doc.merge_patch(overrides);
  RunConfig config = resolve_config(doc, c.preset);
  config.command = {{"name", sub->get_name()}, {"flags", given_flags(sub)}};
  return config;
}

fs::path prepare_out(const RunConfig& config) {
  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  write_resolved_config(config, dir);
  return dir;
}

void save_tree(const TreeModel& tree, const fs::path& path) { write_text_file(path, dump_json(tree_to_json(tree))); }

TreeModel load_tree(const fs::path& path) {
  try {
    return tree_from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// Features and labels a network was trained on: a dataset CSV, or a preprocess directory
// whose train, valid and test files are stacked in that order.
std::pair<Matrix, Vector> training_rows(const std::string& ref) {
  if (ref.empty()) throw DataError("network has no dataset reference");
  if (!fs::is_directory(ref)) return read_labeled_csv(ref);
  auto [train_x, train_y] = read_labeled_csv(fs::path(ref) / "train.csv");
  auto [valid_x, valid_y] = read_labeled_csv(fs::path(ref) / "valid.csv");
  auto [test_x, test_y] = read_labeled_csv(fs::path(ref) / "test.csv");
  Matrix x(train_x.rows() + valid_x.rows() + test_x.rows(), train_x.cols());
  Vector y(x.rows());
  x << train_x, valid_x, test_x;
  y << train_y, valid_y, test_y;
  return {std::move(x), std::move(y)};
}

Matrix held_out(const LambdaNet& lambda) {
  const auto [x, y] = training_rows(lambda.dataset_ref);
  if (lambda.split.test.empty()) throw DataError("network has no held-out rows recorded");
  Matrix out(static_cast<Eigen::Index>(lambda.split.test.size()), x.cols());
  for (std::size_t k = 0; k < lambda.split.test.size(); ++k) {
    const Eigen::Index r = lambda.split.test[k];
    if (r < 0 || r >= x.rows()) throw DataError("held-out row index out of range for " + lambda.dataset_ref);
    out.row(static_cast<Eigen::Index>(k)) = x.row(r);
  }
  return out;
}

std::vector<BenchmarkTarget> collect_targets(const RunConfig& config, std::size_t limit) {
  std::vector<BenchmarkTarget> targets;
  if (!config.paths.corpus.empty()) targets = corpus_targets(load_corpus(config.paths.corpus));
  for (const std::string& path : config.paths.lambdas) {
    LambdaNet lambda = load_lambda(path);
    Matrix x = held_out(lambda);
    targets.push_back({fs::path(path).stem().string(), std::move(lambda), std::move(x)});
  }
  if (targets.empty()) throw ConfigError("config.paths: set corpus or lambdas to choose benchmark targets");
  if (limit > 0 && targets.size() > limit) targets.resize(limit);
  return targets;
}

std::string tree_text(const TreeModel& tree, const std::string& format) {
  if (format == "dot") return to_dot(tree);
  if (format == "json") return dump_json(tree_to_json(tree));
  throw ConfigError("--format: expected dot or json");
}

}  // namespace

int command_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Interpretation networks: translate trained networks into decision trees"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "inet 1.0.0");

  Common common;
  std::function<void()> action;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate one synthetic dataset");
  add_common(gen, common);
  Eigen::Index gen_n = 0, gen_m = 0;
  double gen_p = 0.0;
  gen->add_option("--n", gen_n, "Feature count");
  gen->add_option("--m", gen_m, "Row count");
  gen->add_option("--p", gen_p, "Distribution parameter bound");
  gen->callback([&] {
    action = [&] {
      nlohmann::json o;
      if (gen->get_option("--n")->count()) o["data"]["n"] = gen_n;
      if (gen->get_option("--m")->count()) o["data"]["m"] = gen_m;
      if (gen->get_option("--p")->count()) o["data"]["p"] = gen_p;
      const RunConfig config = load_run(common, o, gen);
      const fs::path dir = prepare_out(config);
      const SyntheticDataset ds =
          generate_dataset(config.corpus.n, config.corpus.m, config.corpus.p, derive_seed(config.seed, streams::dataset, 0));
      save_dataset(ds, dir / "dataset.csv", dir / "dataset.json");
      out << (dir / "dataset.csv").string() << "\n";
    };
  });

  // train-lambda
  auto* tl = app.add_subcommand("train-lambda", "Train the network to be interpreted");
  add_common(tl, common);
  std::string tl_data, tl_split_dir;
  auto* tl_data_opt = tl->add_option("--data", tl_data, "Dataset CSV (f0..,label)")->check(CLI::ExistingFile);
  tl->add_option("--split-dir", tl_split_dir, "Directory written by preprocess")
      ->check(CLI::ExistingDirectory)
      ->excludes(tl_data_opt);
  tl->callback([&] {
    action = [&] {
      const RunConfig config = load_run(common, nlohmann::json::object(), tl);
      if (tl_data.empty() == tl_split_dir.empty()) throw ConfigError("train-lambda: give exactly one of --data or --split-dir");
      const fs::path dir = prepare_out(config);
      const std::uint64_t seed = derive_seed(config.seed, streams::lambda_train, 0);
      const LambdaConfig& lc = config.corpus.lambda;
      LambdaNet lambda;
      if (!tl_data.empty()) {
        const auto [x, y] = read_labeled_csv(tl_data);
        const RowSplit split = split_rows(x.rows(), lc.valid_fraction, lc.test_fraction, mix64(seed ^ 0x5eed));
        lambda = train_lambda_net(x, y, split, lc, seed, tl_data);
      } else {
        const auto [x, y] = training_rows(tl_split_dir);
        const Eigen::Index n_train = read_labeled_csv(fs::path(tl_split_dir) / "train.csv").first.rows();
        const Eigen::Index n_valid = read_labeled_csv(fs::path(tl_split_dir) / "valid.csv").first.rows();
        RowSplit split;
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
          (r < n_train ? split.train : r < n_train + n_valid ? split.valid : split.test).push_back(r);
        }
        lambda = train_lambda_net(x, y, split, lc, seed, tl_split_dir);
      }
      save_lambda(lambda, dir / "lambda.json");
      const nlohmann::json metrics = {{"train_accuracy", lambda.train_accuracy}, {"test_accuracy", lambda.test_accuracy}};
      write_text_file(dir / "metrics.json", dump_json(metrics));
      out << dump_json(metrics);
    };
  });

  // build-corpus
  auto* bc = app.add_subcommand("build-corpus", "Generate datasets and train one network per dataset");
  add_common(bc, common);
  std::size_t bc_train = 0, bc_valid = 0, bc_test = 0;
  Eigen::Index bc_n = 0, bc_m = 0;
  bc->add_option("--count-train", bc_train);
  bc->add_option("--count-valid", bc_valid);
  bc->add_option("--count-test", bc_test);
  bc->add_option("--n", bc_n, "Feature count");
  bc->add_option("--m", bc_m, "Rows per dataset");
  bc->callback([&] {
    action = [&] {
      nlohmann::json o;
      if (bc->get_option("--count-train")->count()) o["corpus"]["count_train"] = bc_train;
      if (bc->get_option("--count-valid")->count()) o["corpus"]["count_valid"] = bc_valid;
      if (bc->get_option("--count-test")->count()) o["corpus"]["count_test"] = bc_test;
      if (bc->get_option("--n")->count()) o["data"]["n"] = bc_n;
      if (bc->get_option("--m")->count()) o["data"]["m"] = bc_m;
      const RunConfig config = load_run(common, o, bc);
      const fs::path dir = prepare_out(config);
      const LambdaCorpus corpus = build_corpus(config.corpus);
      save_corpus(corpus, dir);
      out << corpus.entries.size() << " entries written to " << dir.string() << "\n";
    };
  });

  // train-inet
  auto* ti = app.add_subcommand("train-inet", "Train an interpretation network on a corpus");
  add_common(ti, common);
  std::string ti_corpus, ti_family;
  ti->add_option("--corpus", ti_corpus, "Corpus directory")->check(CLI::ExistingDirectory);
  ti->add_option("--family", ti_family, "standard_dt, univariate_sdt or standard_sdt");
  ti->callback([&] {
    action = [&] {
      nlohmann::json o;
      if (!ti_corpus.empty()) o["paths"]["corpus"] = ti_corpus;
      if (!ti_family.empty()) o["inet"]["family"] = ti_family;
      const RunConfig config = load_run(common, o, ti);
      if (config.paths.corpus.empty()) throw ConfigError("train-inet: --corpus (or paths.corpus) required");
      const fs::path dir = prepare_out(config);
      const LambdaCorpus corpus = load_corpus(config.paths.corpus);
      INetHistory history;
      const INetModel model =
          train_inet(corpus, config.inet_family, config.inet,
                     derive_seed(config.seed, streams::inet_train, static_cast<std::uint64_t>(config.inet_family)), &history);
      save_inet(model, dir / "inet.json");
      std::ostringstream csv;
      write_csv_row(csv, {"epoch", "train_loss", "valid_loss"});
      for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
        write_csv_row(csv, {std::to_string(e), format_double(history.train_loss[e]), format_double(history.valid_loss[e])});
      }
      write_text_file(dir / "history.csv", csv.str());
      const nlohmann::json summary = {
          {"initial_valid_loss", history.initial_valid_loss},
          {"best_epoch", history.best_epoch},
          {"best_valid_loss", history.best_epoch >= 0 ? history.valid_loss[static_cast<std::size_t>(history.best_epoch)]
                                                      : history.initial_valid_loss},
          {"epochs_run", history.train_loss.size()}};
      write_text_file(dir / "training.json", dump_json(summary));
      out << dump_json(summary);
    };
  });

  // interpret
  auto* ip = app.add_subcommand("interpret", "Translate one network into a tree with a trained I-Net");
  add_common(ip, common);
  std::string ip_inet, ip_lambda, ip_format = "json";
  ip->add_option("--inet", ip_inet, "I-Net model JSON")->required()->check(CLI::ExistingFile);
  ip->add_option("--lambda", ip_lambda, "Network model JSON")->required()->check(CLI::ExistingFile);
  ip->add_option("--format", ip_format, "json or dot")->check(CLI::IsMember({"json", "dot"}));
  ip->callback([&] {
    action = [&] {
      const RunConfig config = load_run(common, nlohmann::json::object(), ip);
      const TreeModel tree = interpret(load_inet(ip_inet), load_lambda(ip_lambda).theta);
      const std::string text = tree_text(tree, ip_format);
      if (!common.out.empty()) {
        const fs::path dir = prepare_out(config);
        write_text_file(dir / ("tree." + ip_format), text);
      }
      out << text;
    };
  });

  // distill
  auto* ds = app.add_subcommand("distill", "Query a network and fit a surrogate tree");
  add_common(ds, common);
  std::string ds_lambda, ds_family = "standard_dt", ds_strategy = "standard_uniform", ds_test;
  std::size_t ds_queries = 0;
  ds->add_option("--lambda", ds_lambda, "Network model JSON")->required()->check(CLI::ExistingFile);
  ds->add_option("--family", ds_family, "standard_dt, univariate_sdt or standard_sdt");
  ds->add_option("--strategy", ds_strategy, "multi_distribution, standard_uniform or standard_normal");
  ds->add_option("--queries", ds_queries, "Query point count");
  ds->add_option("--test", ds_test, "Labeled CSV to measure fidelity on (default: the network's held-out rows)")
      ->check(CLI::ExistingFile);
  ds->callback([&] {
    action = [&] {
      nlohmann::json o;
      if (ds->get_option("--queries")->count()) o["distill"]["query_count"] = ds_queries;
      const RunConfig config = load_run(common, o, ds);
      const TreeFamily family = family_from_string(ds_family);
      const QueryStrategy strategy = strategy_from_string(ds_strategy);
      const fs::path dir = prepare_out(config);
      const LambdaNet lambda = load_lambda(ds_lambda);
      const std::uint64_t seed = trial_seed(config.seed, 0, strategy, 0);
      const DistillResult result = distill(lambda, family, strategy, config.distill, seed);
      save_tree(result.tree, dir / "tree.json");
      std::optional<double> test_fidelity;
      if (!ds_test.empty()) {
        test_fidelity = fidelity(result.tree, lambda, read_labeled_csv(ds_test).first);
      } else if (!lambda.dataset_ref.empty() && fs::exists(lambda.dataset_ref) && !lambda.split.test.empty()) {
        test_fidelity = fidelity(result.tree, lambda, held_out(lambda));
      }
      std::ostringstream csv;
      write_csv_row(csv, {"strategy", "family", "seed", "fidelity_on_query", "fidelity_on_test"});
      write_csv_row(csv, {std::string(to_string(strategy)), std::string(to_string(family)), std::to_string(seed),
                          format_double(result.fidelity_on_query), test_fidelity ? format_double(*test_fidelity) : ""});
      write_text_file(dir / "trial.csv", csv.str());
      out << csv.str();
    };
  });

  // benchmark
  auto* bm = app.add_subcommand("benchmark", "I-Net against sample-based distillation");
  add_common(bm, common);
  std::size_t bm_limit = 0;
  bm->add_option("--targets", bm_limit, "Use at most this many targets (0 = all)");
  bm->callback([&] {
    action = [&] {
      const RunConfig config = load_run(common, nlohmann::json::object(), bm);
      std::vector<std::string> missing;
      for (TreeFamily f : config.benchmark.families) {
        if (!config.paths.inet.count(std::string(to_string(f)))) missing.emplace_back(to_string(f));
      }
      if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
        throw ConfigError("config.paths.inet: no I-Net model for " + list);
      }
      const fs::path dir = prepare_out(config);
      const auto targets = collect_targets(config, bm_limit);
      std::map<TreeFamily, INetModel> models;
      std::map<TreeFamily, const INetModel*> refs;
      for (TreeFamily f : config.benchmark.families) {
        models[f] = load_inet(config.paths.inet.at(std::string(to_string(f))));
        refs[f] = &models[f];
      }
      const FidelityReport report = run_benchmark(targets, refs, config.benchmark);
      write_report_csv(report.rows, dir / "report.csv");
      write_aggregate_csv(report.aggregates, dir / "aggregate.csv");
      out << report.rows.size() << " rows written to " << (dir / "report.csv").string() << "\n";
    };
  });

  // sweep-samples
  auto* sw = app.add_subcommand("sweep-samples", "Sample-based fidelity as a function of query count");
  add_common(sw, common);
  std::size_t sw_limit = 0;
  sw->add_option("--targets", sw_limit, "Use at most this many targets (0 = all)");
  sw->callback([&] {
    action = [&] {
      const RunConfig config = load_run(common, nlohmann::json::object(), sw);
      const fs::path dir = prepare_out(config);
      const auto rows = sample_size_sweep(collect_targets(config, sw_limit), config.sweep);
      write_sweep_csv(rows, dir / "sweep.csv");
      out << rows.size() << " rows written to " << (dir / "sweep.csv").string() << "\n";
    };
  });

  // boundary
  auto* bd = app.add_subcommand("boundary", "Decision-boundary grid over [0,1]^2");
  add_common(bd, common);
  std::string bd_lambda, bd_tree;
  int bd_resolution = 100;
  bool bd_svg = false;
  auto* bd_lambda_opt = bd->add_option("--lambda", bd_lambda, "Network model JSON")->check(CLI::ExistingFile);
  bd->add_option("--tree", bd_tree, "Tree JSON")->check(CLI::ExistingFile)->excludes(bd_lambda_opt);
  bd->add_option("--resolution", bd_resolution, "Cells per axis");
  bd->add_flag("--svg", bd_svg, "Also write grid.svg");
  bd->callback([&] {
    action = [&] {
      const RunConfig config = load_run(common, nlohmann::json::object(), bd);
      if (bd_lambda.empty() == bd_tree.empty()) throw ConfigError("boundary: give exactly one of --lambda or --tree");
      const BoundaryGrid grid =
          bd_lambda.empty() ? boundary_grid(load_tree(bd_tree), bd_resolution) : boundary_grid(load_lambda(bd_lambda), bd_resolution);
      const fs::path dir = prepare_out(config);
      write_grid_csv(grid, dir / "grid.csv");
      if (bd_svg) write_text_file(dir / "grid.svg", grid_svg(grid));
      out << (dir / "grid.csv").string() << "\n";
    };
  });

  // preprocess
  auto* pp = app.add_subcommand("preprocess", "Prepare a real-world CSV (impute, encode, scale, split)");
  add_common(pp, common);
  std::string pp_input, pp_schema;
  bool pp_scale_first = false;
  pp->add_option("--input", pp_input, "Raw CSV with header")->required()->check(CLI::ExistingFile);
  pp->add_option("--schema", pp_schema, "Column schema JSON")->required()->check(CLI::ExistingFile);
  pp->add_flag("--scale-before-split", pp_scale_first, "Compute statistics over all rows before splitting");
  pp->callback([&] {
    action = [&] {
      nlohmann::json o;
      if (pp_scale_first) o["ingest"]["scale_before_split"] = true;
      const RunConfig config = load_run(common, o, pp);
      ColumnSchema schema;
      try {
        schema = schema_from_json(nlohmann::json::parse(read_text_file(pp_schema)));
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(pp_schema + ": " + e.what());
      }
      const SplitDataset data = preprocess(read_csv(pp_input), schema, config.seed, config.ingest);
      const fs::path dir = prepare_out(config);
      save_split_dataset(data, dir);
      out << data.train_x.rows() << " train / " << data.valid_x.rows() << " valid / " << data.test_x.rows()
          << " test rows, " << data.features.size() << " features\n";
    };
  });

  // export-tree
  auto* et = app.add_subcommand("export-tree", "Render a tree JSON as DOT or canonical JSON");
  add_common(et, common);
  std::string et_tree, et_format = "dot";
  et->add_option("--tree", et_tree, "Tree JSON")->required()->check(CLI::ExistingFile);
  et->add_option("--format", et_format, "dot or json")->check(CLI::IsMember({"json", "dot"}));
  et->callback([&] {
    action = [&] {
      const RunConfig config = load_run(common, nlohmann::json::object(), et);
      const std::string text = tree_text(load_tree(et_tree), et_format);
      if (!common.out.empty()) {
        const fs::path dir = prepare_out(config);
        write_text_file(dir / ("tree." + et_format), text);
      }
      out << text;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }
  try {
    if (action) action();
    return kExitOk;
  } catch (const Error& e) {
    const char* kind = e.kind() == Error::Kind::config ? "config" : e.kind() == Error::Kind::data ? "data" : "numerical";
    err << "error: kind=" << kind << " message=" << nlohmann::json(std::string(e.what())).dump() << "\n";
    return exit_code_for(e);
  } catch (const nlohmann::json::exception& e) {
    err << "error: kind=data message=" << nlohmann::json(std::string(e.what())).dump() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: kind=data message=" << nlohmann::json(std::string(e.what())).dump() << "\n";
    return kExitData;
  }
}

}  // namespace inet
