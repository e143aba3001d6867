#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctmsm/inference.hpp"
#include "ctmsm/model.hpp"
#include "ctmsm/simulate.hpp"

namespace ctmsm {

using Json = nlohmann::ordered_json;

// Model files use one-based state numbers ("from": 1, "to": 2), as in parameter names.
ModelSpec model_from_json(const Json& j);
Json model_to_json(const ModelSpec& spec);
ModelSpec load_model(const std::string& path);

/// Simulation config without the seed; the seed always comes from the command line.
SimConfig sim_config_from_json(const Json& j);
Json sim_config_to_json(const SimConfig& config);
SimConfig load_sim_config(const std::string& path);

struct ReportContext {
  std::uint64_t seed = 0;
  int starts = 1;
  std::string data_dir;
};

/// Estimates on both scales, Wald intervals, covariance and convergence metadata.
Json fit_report(const FitResult& fit, const ReportContext& context, double level = 0.95);

/// The parts of a fit needed downstream: spec, estimates, covariance, log-likelihood.
FitResult fit_from_report(const Json& report);
FitResult load_fit_report(const std::string& path);

/// Generating values plus every individual's true path (one-based states).
Json truth_record(const SimConfig& config, const Simulation& sim);

Json read_json_file(const std::string& path);
/// Writes `j` with two-space indentation and a trailing newline. Throws OutputError.
void write_json_file(const std::string& path, const Json& j);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

struct RunManifest {
  std::string command;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string version;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  double wall_time = 0.0;
  Json details = Json::object();

  /// Digests are computed from the input files at serialization time.
  Json to_json() const;
};

std::string code_version();

}  // namespace ctmsm
