#include "ctmsm/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ctmsm/data.hpp"
#include "ctmsm/decode.hpp"
#include "ctmsm/error.hpp"
#include "ctmsm/inference.hpp"
#include "ctmsm/io.hpp"
#include "ctmsm/parallel.hpp"
#include "ctmsm/simulate.hpp"

namespace ctmsm {
namespace {

namespace fs = std::filesystem;

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::uint64_t require_seed(const GlobalOptions& global, const std::string& command) {
  if (!global.seed) throw UsageError(command + ": --seed is required");
  return *global.seed;
}

void prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw OutputError("cannot create output directory " + dir);
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw OutputError("cannot write " + path);
  return out;
}

void finish(RunManifest& manifest, const std::string& dir, const Stopwatch& clock) {
  manifest.version = code_version();
  manifest.wall_time = clock.seconds();
  write_json_file(join(dir, "manifest.json"), manifest.to_json());
}

EncounterData load_data(const std::string& dir, const GlobalOptions& global) {
  if (!fs::is_directory(dir)) throw FormatError("data directory " + dir + " does not exist");
  return load_encounter_dir(dir, CsvOptions{global.delimiter});
}

void check_data_matches(const ModelSpec& spec, const EncounterData& data) {
  if (data.grid.areas() != spec.alive_states) {
    throw ValidationError("effort file has " + std::to_string(data.grid.areas()) + " areas but the model has " +
                          std::to_string(spec.alive_states) + " alive states");
  }
  if (!spec.covariate) return;
  for (const auto& h : data.histories) {
    if (!h.covariates.count(*spec.covariate)) {
      throw ValidationError("individual '" + h.id + "' lacks covariate '" + *spec.covariate + "'");
    }
  }
}

std::vector<std::string> data_inputs(const std::string& dir) {
  std::vector<std::string> files{join(dir, "histories.csv"), join(dir, "effort.csv")};
  if (fs::exists(join(dir, "individuals.csv"))) files.push_back(join(dir, "individuals.csv"));
  return files;
}

double quantile(std::vector<double> v, double prob) {
  std::sort(v.begin(), v.end());
  const double pos = prob * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::string interval_label(double l) { return format_real(l); }

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return kExitUsage;
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const FormatError*>(&e) || dynamic_cast<const ValidationError*>(&e)) return kExitIngestion;
  if (dynamic_cast<const MismatchError*>(&e)) return kExitMismatch;
  if (dynamic_cast<const OutputError*>(&e)) return kExitOutput;
  return kExitFailure;
}

char parse_delimiter(const std::string& s) {
  if (s == "tab" || s == "\\t" || s == "\t") return '\t';
  if (s.size() != 1 || s == "\"" || s == "\n") throw UsageError("--delimiter must be a single character or 'tab'");
  return s[0];
}

int cmd_simulate(const SimulateArgs& args, const GlobalOptions& global, std::ostream& log) {
  const Stopwatch clock;
  SimConfig config = load_sim_config(args.config);
  config.seed = require_seed(global, "simulate");
  prepare_dir(args.out_dir);

  const Simulation sim = simulate(config, global.threads);
  save_encounter_dir(args.out_dir, sim.data, CsvOptions{global.delimiter});
  write_json_file(join(args.out_dir, "truth.json"), truth_record(config, sim));

  RunManifest m;
  m.command = "simulate";
  m.config_path = args.config;
  m.seed = config.seed;
  m.inputs = {args.config};
  m.outputs = {join(args.out_dir, "histories.csv"), join(args.out_dir, "effort.csv"), join(args.out_dir, "truth.json")};
  if (config.model.covariate) m.outputs.push_back(join(args.out_dir, "individuals.csv"));
  m.details["individuals_simulated"] = config.individuals;
  m.details["individuals_detected"] = sim.data.histories.size();
  m.details["occasions"] = sim.data.grid.occasions();
  finish(m, args.out_dir, clock);
  log << "simulated " << config.individuals << " individuals, " << sim.data.histories.size() << " detected, "
      << sim.data.grid.occasions() << " occasions\n";
  return kExitOk;
}

int cmd_fit(const FitArgs& args, const GlobalOptions& global, std::ostream& log) {
  const Stopwatch clock;
  ModelSpec spec = load_model(args.model);
  const EncounterData data = load_data(args.data_dir, global);
  const std::uint64_t seed = require_seed(global, "fit");
  if (args.l) {
    if (!(*args.l > 0.0)) throw UsageError("--l must be positive");
    spec.interval_length = *args.l;
  }
  if (args.starts < 1) throw UsageError("--starts must be at least 1");
  check_data_matches(spec, data);
  prepare_dir(args.out_dir);

  FitOptions options;
  options.starts = args.starts;
  options.seed = seed;
  options.threads = global.threads;
  options.optimizer = args.nelder_mead ? Optimizer::NelderMead : Optimizer::Bfgs;
  const ParamVector init = default_initial(spec);
  const ReportContext context{seed, args.starts, args.data_dir};

  RunManifest m;
  m.command = "fit";
  m.config_path = args.model;
  m.seed = seed;
  m.inputs = data_inputs(args.data_dir);
  m.inputs.push_back(args.model);
  m.details["starts"] = args.starts;
  m.details["optimizer"] = args.nelder_mead ? "nelder-mead" : "bfgs";

  bool ok = true;
  if (args.sweep.empty()) {
    const FitResult result = fit(spec, data, init, options);
    const std::string report = join(args.out_dir, "report.json");
    write_json_file(report, fit_report(result, context));
    m.outputs.push_back(report);
    m.details["converged"] = result.converged;
    m.details["loglik"] = result.loglik;
    ok = result.converged;
    log << "l = " << result.l_used << ": loglik " << format_real(result.loglik) << ", "
        << (result.converged ? "converged" : "not converged (" + result.message + ")") << '\n';
  } else {
    const IntervalSweepResult sweep = interval_sweep(spec, data, args.sweep, init, options);
    const ParamVector layout = parameter_layout(spec);
    const std::string csv_path = join(args.out_dir, "sweep.csv");
    std::ofstream csv = open_output(csv_path);
    const char d = global.delimiter;
    csv << "l" << d << "loglik" << d << "converged" << d << "iterations" << d << "wall_time";
    for (const auto& name : layout.names) csv << d << name;
    csv << d << "error\n";
    Json rows = Json::array();
    for (const SweepRow& row : sweep.rows) {
      csv << format_real(row.interval_length);
      if (row.fit) {
        const FitResult& f = *row.fit;
        csv << d << format_real(f.loglik) << d << (f.converged ? 1 : 0) << d << f.iterations << d
            << format_real(f.wall_time);
        for (const auto& v : natural_parameters(f.spec, f.mle)) csv << d << format_real(v.value);
        csv << d << '\n';
        const std::string report = join(args.out_dir, "report_l" + interval_label(row.interval_length) + ".json");
        write_json_file(report, fit_report(f, context));
        m.outputs.push_back(report);
        ok = ok && f.converged;
        rows.push_back({{"l", row.interval_length}, {"loglik", f.loglik}, {"converged", f.converged}});
        log << "l = " << row.interval_length << ": loglik " << format_real(f.loglik)
            << (f.converged ? "" : " (not converged)") << '\n';
      } else {
        csv << d << d << 0 << d << d;
        for (std::size_t i = 0; i < layout.names.size(); ++i) csv << d;
        std::string error = row.error;
        std::replace(error.begin(), error.end(), d, ' ');
        csv << d << error << '\n';
        ok = false;
        rows.push_back({{"l", row.interval_length}, {"error", row.error}});
        log << "l = " << row.interval_length << ": failed: " << row.error << '\n';
      }
    }
    if (!csv) throw OutputError("cannot write " + csv_path);
    m.outputs.insert(m.outputs.begin(), csv_path);
    m.details["sweep"] = rows;
  }
  finish(m, args.out_dir, clock);
  return ok ? kExitOk : kExitNotConverged;
}

int cmd_decode(const DecodeArgs& args, const GlobalOptions& global, std::ostream& log) {
  const Stopwatch clock;
  const ModelSpec spec = load_model(args.model);
  const EncounterData data = load_data(args.data_dir, global);
  const FitResult fit = load_fit_report(args.report);
  const ParamVector layout = parameter_layout(spec);
  if (layout.size() != fit.mle.size()) {
    throw MismatchError("model file implies " + std::to_string(layout.size()) + " parameters but the fit report has " +
                        std::to_string(fit.mle.size()));
  }
  if (layout.names != fit.mle.names) throw MismatchError("model file parameters differ from the fit report's");
  check_data_matches(fit.spec, data);
  if (args.plot_data && args.draws > 0) require_seed(global, "decode --plot-data");
  prepare_dir(args.out_dir);

  RunManifest m;
  m.command = "decode";
  m.config_path = args.model;
  m.seed = global.seed;
  m.inputs = data_inputs(args.data_dir);
  m.inputs.push_back(args.model);
  m.inputs.push_back(args.report);

  const std::vector<DecodedPath> paths = decode_all(fit.spec, fit.mle, data, global.threads);
  const std::string decoded = join(args.out_dir, "decoded.csv");
  {
    std::ofstream out = open_output(decoded);
    write_decoded(out, data, paths, global.delimiter);
  }
  m.outputs.push_back(decoded);

  bool ok = true;
  if (args.oracle) {
    std::vector<DecodedPath> slow(data.histories.size());
    parallel_for(data.histories.size(), global.threads, [&](std::size_t i) {
      slow[i] = decode_by_enumeration(fit.spec, fit.mle, data.grid, data.histories[i]);
    });
    bool agree = true;
    double diff = 0.0;
    for (std::size_t i = 0; i < paths.size(); ++i) {
      agree = agree && paths[i].states == slow[i].states;
      diff = std::max(diff, (paths[i].posterior - slow[i].posterior).cwiseAbs().maxCoeff());
    }
    const std::string oracle = join(args.out_dir, "decoded_oracle.csv");
    std::ofstream out = open_output(oracle);
    write_decoded(out, data, slow, global.delimiter);
    m.outputs.push_back(oracle);
    m.details["oracle_states_agree"] = agree;
    m.details["oracle_max_posterior_difference"] = diff;
    ok = agree && diff < 1e-10;
    log << "oracle: states " << (agree ? "agree" : "DIFFER") << ", max posterior difference " << diff << '\n';
  }

  if (args.plot_data) {
    if (args.draws < 0) throw UsageError("--draws must be non-negative");
    std::vector<double> days;
    for (int day = 0; day < static_cast<int>(std::ceil(fit.spec.period)); ++day) days.push_back(day);
    BandOptions bo;
    bo.draws = args.draws;
    bo.seed = global.seed.value_or(0);
    bo.repair_covariance = args.repair_covariance;
    const auto bands = mc_intensity_bands(fit, days, bo);
    const std::string plot = join(args.out_dir, "intensity.csv");
    std::ofstream out = open_output(plot);
    const char d = global.delimiter;
    out << "transition" << d << "level" << d << "day" << d << "estimate" << d << "lower" << d << "upper\n";
    for (const auto& b : bands) {
      for (std::size_t i = 0; i < b.days.size(); ++i) {
        out << b.transition << d << b.level << d << format_real(b.days[i]) << d << format_real(b.plug_in[i]) << d
            << format_real(b.lower[i]) << d << format_real(b.upper[i]) << '\n';
      }
    }
    m.outputs.push_back(plot);
    m.details["draws"] = args.draws;
  }
  m.details["individuals"] = data.histories.size();
  finish(m, args.out_dir, clock);
  log << "decoded " << data.histories.size() << " individuals\n";
  return ok ? kExitOk : kExitFailure;
}

int cmd_bias_study(const BiasStudyArgs& args, const GlobalOptions& global, std::ostream& log) {
  const Stopwatch clock;
  SimConfig base = load_sim_config(args.config);
  const std::uint64_t seed = require_seed(global, "bias-study");
  if (args.replicates < 1) throw UsageError("--replicates must be at least 1");
  if (!(args.l > 0.0)) throw UsageError("--l must be positive");
  if (args.starts < 1) throw UsageError("--starts must be at least 1");
  std::vector<int> n_list = args.n_list.empty() ? std::vector<int>{base.individuals} : args.n_list;
  for (int n : n_list) {
    if (n < 1) throw UsageError("--n-list entries must be at least 1");
  }
  base.model.interval_length = args.l;
  if (args.span_days) base.span_days = *args.span_days;
  try {
    base.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  prepare_dir(args.out_dir);

  struct Task {
    int n = 0;
    int replicate = 0;
    std::uint64_t seed = 0;
    std::optional<FitResult> fit;
    std::string error;
  };
  std::vector<Task> tasks;
  for (std::size_t k = 0; k < n_list.size(); ++k) {
    for (int r = 0; r < args.replicates; ++r) {
      Task t;
      t.n = n_list[k];
      t.replicate = r + 1;
      t.seed = derive_rng(seed, (static_cast<std::uint64_t>(k) << 32) | static_cast<std::uint64_t>(r))();
      tasks.push_back(std::move(t));
    }
  }
  parallel_for(tasks.size(), global.threads, [&](std::size_t i) {
    Task& t = tasks[i];
    SimConfig c = base;
    c.individuals = t.n;
    c.seed = t.seed;
    try {
      const Simulation sim = simulate(c);
      FitOptions o;
      o.starts = args.starts;
      o.seed = t.seed;
      o.compute_covariance = false;
      t.fit = fit(c.model, sim.data, default_initial(c.model), o);
    } catch (const Error& e) {
      t.error = e.what();
    }
  });

  const ParamVector layout = parameter_layout(base.model);
  const char d = global.delimiter;
  const std::string bias_path = join(args.out_dir, "bias.csv");
  std::ofstream bias = open_output(bias_path);
  bias << "n" << d << "replicate" << d << "seed" << d << "converged" << d << "parameter" << d << "truth" << d
       << "estimate" << d << "measure" << d << "value\n";
  // values[n index][parameter] over converged replicates
  std::vector<std::vector<std::vector<double>>> values(n_list.size(),
                                                       std::vector<std::vector<double>>(layout.names.size()));
  Json failures = Json::array();
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const Task& t = tasks[i];
    const std::size_t k = i / static_cast<std::size_t>(args.replicates);
    if (!t.fit) {
      failures.push_back({{"n", t.n}, {"replicate", t.replicate}, {"error", t.error}});
      continue;
    }
    if (!t.fit->converged) {
      failures.push_back({{"n", t.n}, {"replicate", t.replicate}, {"error", "not converged: " + t.fit->message}});
    }
    const auto estimates = natural_parameters(t.fit->spec, t.fit->mle);
    for (std::size_t p = 0; p < estimates.size(); ++p) {
      const double truth = base.truth.at(estimates[p].name);
      const bool relative = truth != 0.0;
      const double value = relative ? (estimates[p].value - truth) / truth : estimates[p].value - truth;
      bias << t.n << d << t.replicate << d << t.seed << d << (t.fit->converged ? 1 : 0) << d << estimates[p].name << d
           << format_real(truth) << d << format_real(estimates[p].value) << d
           << (relative ? "relative" : "absolute") << d << format_real(value) << '\n';
      if (t.fit->converged) values[k][p].push_back(value);
    }
  }
  if (!bias) throw OutputError("cannot write " + bias_path);

  const std::string summary_path = join(args.out_dir, "summary.csv");
  std::ofstream summary = open_output(summary_path);
  summary << "n" << d << "parameter" << d << "truth" << d << "measure" << d << "replicates" << d << "median" << d << "q1"
          << d << "q3\n";
  for (std::size_t k = 0; k < n_list.size(); ++k) {
    for (std::size_t p = 0; p < layout.names.size(); ++p) {
      const double truth = base.truth.at(layout.names[p]);
      const auto& v = values[k][p];
      summary << n_list[k] << d << layout.names[p] << d << format_real(truth) << d
              << (truth != 0.0 ? "relative" : "absolute") << d << v.size();
      if (v.empty()) {
        summary << d << d << d << '\n';
      } else {
        summary << d << format_real(quantile(v, 0.5)) << d << format_real(quantile(v, 0.25)) << d
                << format_real(quantile(v, 0.75)) << '\n';
      }
    }
  }
  if (!summary) throw OutputError("cannot write " + summary_path);

  RunManifest m;
  m.command = "bias-study";
  m.config_path = args.config;
  m.seed = seed;
  m.inputs = {args.config};
  m.outputs = {bias_path, summary_path};
  m.details["replicates"] = args.replicates;
  m.details["n"] = n_list;
  m.details["interval_length"] = args.l;
  m.details["span_days"] = base.span_days;
  m.details["starts"] = args.starts;
  m.details["start_policy"] = "default initial values plus perturbed restarts; not started at the truth";
  m.details["failures"] = failures.size();
  m.details["failed_replicates"] = failures;
  finish(m, args.out_dir, clock);
  log << tasks.size() << " replicates, " << failures.size() << " failures\n";
  return failures.empty() ? kExitOk : kExitNotConverged;
}

}  // namespace ctmsm
