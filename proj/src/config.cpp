#include "inet/config.hpp"

#include <filesystem>

#include "inet/csv.hpp"

namespace inet {

namespace {

nlohmann::json preset_patch(const std::string& preset) {
  if (preset == "default") return nlohmann::json::object();
  if (preset == "desk") {
    return {
        {"preset", "desk"},
        {"data", {{"n", 2}, {"m", 1000}}},
        {"corpus", {{"count_train", 500}, {"count_valid", 50}, {"count_test", 50}}},
        {"inet",
         {{"epochs", 1000}, {"patience", 25}, {"batch_size", 32}, {"hidden", {256, 128}}, {"dropout", {0.0, 0.0}}}},
        {"benchmark", {{"trials", 3}}},
        {"sweep", {{"sizes", {10000, 100000}}, {"trials", 2}}},
    };
  }
  throw ConfigError("config.preset: unknown preset \"" + preset + "\" (expected default or desk)");
}

// Reports the first field of `doc` that has no counterpart in `reference`.
void reject_unknown(const nlohmann::json& doc, const nlohmann::json& reference, const std::string& path) {
  if (!doc.is_object()) return;
  if (!reference.is_object()) throw ConfigError(path + ": expected a value, not an object");
  for (const auto& [key, value] : doc.items()) {
    const std::string child = path + "." + key;
    if (!reference.contains(key)) throw ConfigError(child + ": unknown field");
    if (reference.at(key).is_object() && !reference.at(key).empty()) reject_unknown(value, reference.at(key), child);
  }
}

template <typename Fn>
auto section(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError("config." + path + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config." + path + ": " + e.what());
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

std::vector<TreeFamily> families_from(const nlohmann::json& doc) {
  std::vector<TreeFamily> out;
  for (const auto& f : doc) out.push_back(family_from_string(f.get<std::string>()));
  return out;
}

std::vector<QueryStrategy> strategies_from(const nlohmann::json& doc) {
  std::vector<QueryStrategy> out;
  for (const auto& s : doc) out.push_back(strategy_from_string(s.get<std::string>()));
  return out;
}

nlohmann::json names(const std::vector<TreeFamily>& families) {
  nlohmann::json out = nlohmann::json::array();
  for (TreeFamily f : families) out.push_back(to_string(f));
  return out;
}

nlohmann::json names(const std::vector<QueryStrategy>& strategies) {
  nlohmann::json out = nlohmann::json::array();
  for (QueryStrategy s : strategies) out.push_back(to_string(s));
  return out;
}

nlohmann::json inet_section(TreeFamily family, const INetTrainConfig& c) {
  nlohmann::json doc = to_json(c);
  doc["family"] = to_string(family);
  return doc;
}

nlohmann::json base_json(const RunConfig& c) {
  const nlohmann::json inet_models = nlohmann::json(c.paths.inet);
  return {
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"preset", c.preset},
      {"data", {{"n", c.corpus.n}, {"m", c.corpus.m}, {"p", c.corpus.p}}},
      {"lambda", to_json(c.corpus.lambda)},
      {"corpus",
       {{"count_train", c.corpus.count_train},
        {"count_valid", c.corpus.count_valid},
        {"count_test", c.corpus.count_test},
        {"max_consecutive_rejections", c.corpus.max_consecutive_rejections},
        {"separability_epochs", c.corpus.separability.max_epochs}}},
      {"inet", inet_section(c.inet_family, c.inet)},
      {"cart", to_json(c.distill.cart)},
      {"sdt", to_json(c.distill.sdt)},
      {"distill", {{"query_count", c.distill.query_count}, {"p", c.distill.p}}},
      {"benchmark",
       {{"families", names(c.benchmark.families)},
        {"strategies", names(c.benchmark.strategies)},
        {"trials", c.benchmark.trials},
        {"alpha", c.benchmark.alpha},
        {"record_wall_time", c.benchmark.record_wall_time}}},
      {"sweep",
       {{"sizes", c.sweep.sizes},
        {"strategies", names(c.sweep.strategies)},
        {"trials", c.sweep.trials},
        {"family", to_string(c.sweep.family)}}},
      {"ingest",
       {{"valid_fraction", c.ingest.valid_fraction},
        {"test_fraction", c.ingest.test_fraction},
        {"rebalance_below", c.ingest.rebalance_below},
        {"scale_before_split", c.ingest.scale_before_split}}},
      {"paths", {{"corpus", c.paths.corpus}, {"inet", inet_models}, {"lambdas", c.paths.lambdas}}},
      {"command", c.command},
  };
}

RunConfig parse(const nlohmann::json& doc) {
  RunConfig c;
  c.seed = section("seed", [&] { return doc.at("seed").get<std::uint64_t>(); });
  c.output_dir = section("output_dir", [&] { return doc.at("output_dir").get<std::string>(); });
  c.preset = doc.at("preset").get<std::string>();
  c.command = doc.value("command", nlohmann::json::object());
  section("data", [&] {
    const auto& d = doc.at("data");
    c.corpus.n = d.at("n").get<Eigen::Index>();
    c.corpus.m = d.at("m").get<Eigen::Index>();
    c.corpus.p = d.at("p").get<double>();
    require(c.corpus.n >= 1, "n: must be at least 1");
    require(c.corpus.m >= 10, "m: must be at least 10");
    require(c.corpus.p > kParamFloor, "p: must exceed 0.05");
    return 0;
  });
  section("lambda", [&] {
    c.corpus.lambda = lambda_config_from_json(doc.at("lambda"));
    const LambdaConfig& l = c.corpus.lambda;
    require(l.hidden >= 1, "hidden: must be at least 1");
    require(l.learning_rate > 0.0, "learning_rate: must be positive");
    require(l.epochs >= 1, "epochs: must be at least 1");
    require(l.batch_size >= 1, "batch_size: must be at least 1");
    require(l.patience >= 1, "patience: must be at least 1");
    require(l.valid_fraction >= 0.0 && l.test_fraction >= 0.0 && l.valid_fraction + l.test_fraction < 1.0,
            "valid_fraction/test_fraction: must be non-negative and sum below 1");
    return 0;
  });
  section("corpus", [&] {
    const auto& d = doc.at("corpus");
    c.corpus.count_train = d.at("count_train").get<std::size_t>();
    c.corpus.count_valid = d.at("count_valid").get<std::size_t>();
    c.corpus.count_test = d.at("count_test").get<std::size_t>();
    c.corpus.max_consecutive_rejections = d.at("max_consecutive_rejections").get<int>();
    c.corpus.separability.max_epochs = d.at("separability_epochs").get<int>();
    require(c.corpus.max_consecutive_rejections >= 1, "max_consecutive_rejections: must be at least 1");
    require(c.corpus.separability.max_epochs >= 1, "separability_epochs: must be at least 1");
    return 0;
  });
  c.corpus.master_seed = c.seed;
  section("inet", [&] {
    const auto& d = doc.at("inet");
    c.inet_family = family_from_string(d.at("family").get<std::string>());
    nlohmann::json rest = d;
    rest.erase("family");
    c.inet = inet_config_from_json(rest, c.inet_family);
    return 0;
  });
  section("cart", [&] { return c.distill.cart = cart_config_from_json(doc.at("cart")); });
  section("sdt", [&] { return c.distill.sdt = sdt_config_from_json(doc.at("sdt")); });
  section("distill", [&] {
    const auto& d = doc.at("distill");
    c.distill.query_count = d.at("query_count").get<std::size_t>();
    c.distill.p = d.at("p").get<double>();
    require(c.distill.query_count >= 2, "query_count: must be at least 2");
    require(c.distill.p > kParamFloor, "p: must exceed 0.05");
    return 0;
  });
  section("benchmark", [&] {
    const auto& d = doc.at("benchmark");
    c.benchmark.families = families_from(d.at("families"));
    c.benchmark.strategies = strategies_from(d.at("strategies"));
    c.benchmark.trials = d.at("trials").get<int>();
    c.benchmark.alpha = d.at("alpha").get<double>();
    c.benchmark.record_wall_time = d.at("record_wall_time").get<bool>();
    require(!c.benchmark.families.empty(), "families: at least one family required");
    require(c.benchmark.trials >= 1, "trials: must be at least 1");
    require(c.benchmark.alpha > 0.0 && c.benchmark.alpha < 1.0, "alpha: must lie in (0,1)");
    return 0;
  });
  c.benchmark.distill = c.distill;
  c.benchmark.master_seed = c.seed;
  section("sweep", [&] {
    const auto& d = doc.at("sweep");
    c.sweep.sizes = d.at("sizes").get<std::vector<std::size_t>>();
    c.sweep.strategies = strategies_from(d.at("strategies"));
    c.sweep.trials = d.at("trials").get<int>();
    c.sweep.family = family_from_string(d.at("family").get<std::string>());
    require(!c.sweep.sizes.empty(), "sizes: at least one size required");
    require(std::is_sorted(c.sweep.sizes.begin(), c.sweep.sizes.end()), "sizes: must be ascending");
    require(c.sweep.sizes.front() >= 2, "sizes: every size must be at least 2");
    require(c.sweep.trials >= 1, "trials: must be at least 1");
    return 0;
  });
  c.sweep.distill = c.distill;
  c.sweep.master_seed = c.seed;
  section("ingest", [&] {
    const auto& d = doc.at("ingest");
    c.ingest.valid_fraction = d.at("valid_fraction").get<double>();
    c.ingest.test_fraction = d.at("test_fraction").get<double>();
    c.ingest.rebalance_below = d.at("rebalance_below").get<double>();
    c.ingest.scale_before_split = d.at("scale_before_split").get<bool>();
    require(c.ingest.valid_fraction >= 0.0 && c.ingest.test_fraction >= 0.0 &&
                c.ingest.valid_fraction + c.ingest.test_fraction < 1.0,
            "valid_fraction/test_fraction: must be non-negative and sum below 1");
    require(c.ingest.rebalance_below >= 0.0 && c.ingest.rebalance_below <= 0.5, "rebalance_below: must lie in [0,0.5]");
    return 0;
  });
  section("paths", [&] {
    const auto& d = doc.at("paths");
    c.paths.corpus = d.at("corpus").get<std::string>();
    c.paths.inet = d.at("inet").get<std::map<std::string, std::string>>();
    c.paths.lambdas = d.at("lambdas").get<std::vector<std::string>>();
    auto exists = [](const std::string& key, const std::string& p) {
      if (!p.empty() && !std::filesystem::exists(p)) throw ConfigError(key + ": path does not exist: " + p);
    };
    exists("corpus", c.paths.corpus);
    for (const auto& [family, p] : c.paths.inet) {
      family_from_string(family);
      exists("inet." + family, p);
    }
    for (std::size_t i = 0; i < c.paths.lambdas.size(); ++i) exists("lambdas[" + std::to_string(i) + "]", c.paths.lambdas[i]);
    return 0;
  });
  return c;
}

}  // namespace

nlohmann::json default_config_json(const std::string& preset) {
  RunConfig defaults;
  defaults.corpus.count_train = 9000;
  defaults.corpus.count_valid = 500;
  defaults.corpus.count_test = 500;
  defaults.inet = default_inet_config(defaults.inet_family);
  nlohmann::json doc = base_json(defaults);
  doc.merge_patch(preset_patch(preset));
  return doc;
}

RunConfig resolve_config(const nlohmann::json& doc, const std::string& preset) {
  if (!doc.is_object()) throw ConfigError("config: top level must be a JSON object");
  std::string chosen = preset;
  if (chosen.empty()) chosen = doc.contains("preset") && doc.at("preset").is_string() ? doc.at("preset").get<std::string>() : "default";
  nlohmann::json merged = default_config_json(chosen);
  reject_unknown(doc, merged, "config");
  // a family switch picks that family's trunk preset unless the document sets it explicitly
  if (doc.contains("inet") && doc.at("inet").contains("family")) {
    const TreeFamily family = section("inet.family", [&] {
      return family_from_string(doc.at("inet").at("family").get<std::string>());
    });
    const nlohmann::json trunk = to_json(default_inet_config(family));
    for (const char* key : {"hidden", "activation", "dropout"}) merged["inet"][key] = trunk.at(key);
    const nlohmann::json patch = preset_patch(chosen);
    if (patch.contains("inet")) merged["inet"].merge_patch(patch.at("inet"));
  }
  merged.merge_patch(doc);
  merged["preset"] = chosen;
  return parse(merged);
}

RunConfig validate_config(const std::filesystem::path& path, const std::string& preset) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return resolve_config(doc, preset);
}

nlohmann::json resolved_json(const RunConfig& config) { return base_json(config); }

std::string dump_json(const nlohmann::json& doc) { return doc.dump(2) + "\n"; }

void write_resolved_config(const RunConfig& config, const std::filesystem::path& dir) {
  write_text_file(dir / "resolved-config.json", dump_json(resolved_json(config)));
}

}  // namespace inet
