#pragma once

#include <cstdint>
#include <exception>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace ctmsm {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitConfig = 3,
  kExitIngestion = 4,
  kExitNotConverged = 5,
  kExitMismatch = 6,
  kExitOutput = 7,
};

/// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e);

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  int threads = 1;
  char delimiter = ',';
};

struct SimulateArgs {
  std::string config;
  std::string out_dir;
};

struct FitArgs {
  std::string data_dir;
  std::string model;
  std::string out_dir;
  std::optional<double> l;        // overrides the model file; default 30 days
  int starts = 5;
  std::vector<double> sweep;      // non-empty: interval-length sweep
  bool nelder_mead = false;
};

struct DecodeArgs {
  std::string data_dir;
  std::string model;
  std::string report;
  std::string out_dir;
  bool plot_data = false;
  int draws = 1000;
  bool repair_covariance = false;
  bool oracle = false;
};

struct BiasStudyArgs {
  std::string config;
  std::string out_dir;
  int replicates = 100;
  std::vector<int> n_list;        // empty: the config's individual count
  double l = 20.0;
  std::optional<double> span_days;
  int starts = 5;
};

// Each command writes its outputs and a manifest.json into its output directory and returns
// an exit code; configuration, ingestion, mismatch and output failures throw.
int cmd_simulate(const SimulateArgs& args, const GlobalOptions& global, std::ostream& log);
int cmd_fit(const FitArgs& args, const GlobalOptions& global, std::ostream& log);
int cmd_decode(const DecodeArgs& args, const GlobalOptions& global, std::ostream& log);
int cmd_bias_study(const BiasStudyArgs& args, const GlobalOptions& global, std::ostream& log);

/// Parses `--delimiter` values: a single character, or "tab".
char parse_delimiter(const std::string& s);

}  // namespace ctmsm
