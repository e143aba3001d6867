#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ctmsm/commands.hpp"
#include "ctmsm/error.hpp"
#include "ctmsm/io.hpp"

using namespace ctmsm;

int main(int argc, char** argv) {
  CLI::App app{"Continuous-time multi-state capture-recapture: simulate, fit and decode"};
  app.set_version_flag("--version", code_version());
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string delimiter = ",";
  app.add_option("--seed", seed, "Master random seed (required by stochastic commands)");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--delimiter", delimiter, "CSV field delimiter (single character or 'tab')");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Simulate encounter data from a config file");
  simulate->add_option("config", sim.config, "Simulation config (JSON)")->required();
  simulate->add_option("-o,--out", sim.out_dir, "Output directory")->required();

  FitArgs fit;
  double l = 0.0;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model by maximum likelihood");
  fit_cmd->add_option("data", fit.data_dir, "Directory with histories.csv and effort.csv")->required();
  fit_cmd->add_option("-m,--model", fit.model, "Model file (JSON)")->required();
  fit_cmd->add_option("-o,--out", fit.out_dir, "Output directory")->required();
  auto* l_opt = fit_cmd->add_option("--l", l, "Partition interval length in days (default 30)");
  fit_cmd->add_option("--starts", fit.starts, "Optimizer starts")->capture_default_str();
  fit_cmd->add_option("--sweep", fit.sweep, "Interval lengths for a sweep, e.g. 89,55,34")->delimiter(',');
  fit_cmd->add_flag("--nelder-mead", fit.nelder_mead, "Use the derivative-free optimizer");

  DecodeArgs dec;
  auto* decode = app.add_subcommand("decode", "Viterbi paths and local state probabilities");
  decode->add_option("data", dec.data_dir, "Directory with histories.csv and effort.csv")->required();
  decode->add_option("-m,--model", dec.model, "Model file (JSON)")->required();
  decode->add_option("-r,--report", dec.report, "Fit report (JSON)")->required();
  decode->add_option("-o,--out", dec.out_dir, "Output directory")->required();
  decode->add_flag("--plot-data", dec.plot_data, "Write day-gridded intensity curves with Monte-Carlo bands");
  decode->add_option("--draws", dec.draws, "Monte-Carlo draws for the bands (0 = plug-in only)")->capture_default_str();
  decode->add_flag("--repair-covariance", dec.repair_covariance, "Clip negative covariance eigenvalues");
  decode->add_flag("--oracle", dec.oracle, "Also decode by exhaustive enumeration and compare");

  BiasStudyArgs bias;
  double span = 0.0;
  auto* bias_cmd = app.add_subcommand("bias-study", "Repeated simulate-and-fit relative bias study");
  bias_cmd->add_option("config", bias.config, "Simulation config (JSON)")->required();
  bias_cmd->add_option("-o,--out", bias.out_dir, "Output directory")->required();
  bias_cmd->add_option("--replicates", bias.replicates, "Replicates per sample size")->capture_default_str();
  bias_cmd->add_option("--n-list", bias.n_list, "Sample sizes, e.g. 100,200,400")->delimiter(',');
  bias_cmd->add_option("--l", bias.l, "Partition interval length in days")->capture_default_str();
  auto* span_opt = bias_cmd->add_option("--span-days", span, "Override the config's study span");
  bias_cmd->add_option("--starts", bias.starts, "Optimizer starts per fit")->capture_default_str();

  for (auto* sub : {simulate, fit_cmd, decode, bias_cmd}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    GlobalOptions global;
    global.seed = seed;
    global.threads = threads;
    global.delimiter = parse_delimiter(delimiter);
    if (*l_opt) fit.l = l;
    if (*span_opt) bias.span_days = span;
    if (*simulate) return cmd_simulate(sim, global, std::cerr);
    if (*fit_cmd) return cmd_fit(fit, global, std::cerr);
    if (*decode) return cmd_decode(dec, global, std::cerr);
    return cmd_bias_study(bias, global, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}
