#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "inet/distill.hpp"
#include "inet/evalharness.hpp"
#include "inet/ingest.hpp"
#include "inet/inet.hpp"
#include "inet/lambdanet.hpp"
#include "json.hpp"

namespace inet {

/// Input artifacts a run refers to; every non-empty path must exist at validation time.
struct RunPaths {
  std::string corpus;                          // corpus directory
  std::map<std::string, std::string> inet;     // family name -> I-Net model file
  std::vector<std::string> lambdas;            // extra lambda model files for benchmark/sweep
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::string preset = "default";
  CorpusSpec corpus;  // data (n, m, p), lambda training and corpus sizes
  TreeFamily inet_family = TreeFamily::standard_dt;
  INetTrainConfig inet;
  DistillConfig distill;
  BenchmarkConfig benchmark;
  SweepConfig sweep;
  PreprocessConfig ingest;
  RunPaths paths;
  nlohmann::json command = nlohmann::json::object();  // subcommand name and flags, echoed only
};

/// Every field at its default, optionally with the named preset ("default" or "desk") applied.
nlohmann::json default_config_json(const std::string& preset = "default");

/// Overlays `doc` on the preset defaults, rejects unknown fields, parses and cross-checks.
/// Error messages carry the JSON path of the offending field (e.g. "config.inet.learning_rate").
RunConfig resolve_config(const nlohmann::json& doc, const std::string& preset = {});
RunConfig validate_config(const std::filesystem::path& path, const std::string& preset = {});

/// Fully expanded document; resolve_config(resolved_json(c)) == c.
nlohmann::json resolved_json(const RunConfig& config);

/// Writes resolved-config.json into dir.
void write_resolved_config(const RunConfig& config, const std::filesystem::path& dir);

/// Deterministic pretty JSON with a trailing newline.
std::string dump_json(const nlohmann::json& doc);

}  // namespace inet
