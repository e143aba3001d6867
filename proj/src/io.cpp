#include "ctmsm/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "ctmsm/error.hpp"

#ifndef CTMSM_VERSION
#define CTMSM_VERSION "unknown"
#endif

namespace ctmsm {
namespace {

void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown field '" + key + "'");
  }
}

template <class T>
T get(const Json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + ": field '" + key + "' has the wrong type");
  }
}

template <class T>
T get_or(const Json& j, const std::string& key, const std::string& where, T fallback) {
  return j.contains(key) ? get<T>(j, key, where) : fallback;
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

double number_from(const Json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

}  // namespace

ModelSpec model_from_json(const Json& j) {
  const std::string where = "model";
  reject_unknown(j, {"alive_states", "period", "interval_length", "study_span", "intensities", "transitions",
                     "covariate", "per_state_mortality", "initial"},
                 where);
  ModelSpec spec;
  spec.alive_states = get<int>(j, "alive_states", where);
  const auto kind = get_or<std::string>(j, "intensities", where, "seasonal");
  if (kind != "seasonal" && kind != "constant") {
    throw ConfigError(where + ": intensities must be 'seasonal' or 'constant'");
  }
  if (spec.alive_states < 1 || spec.alive_states >= kMaxStates) {
    throw ConfigError(where + ": alive_states must be in 1.." + std::to_string(kMaxStates - 1));
  }
  spec = kind == "seasonal" ? ModelSpec::seasonal(spec.alive_states) : ModelSpec::homogeneous(spec.alive_states);
  spec.period = get_or<double>(j, "period", where, spec.period);
  spec.interval_length = get_or<double>(j, "interval_length", where, spec.interval_length);
  spec.study_span = get_or<double>(j, "study_span", where, 0.0);
  if (j.contains("transitions")) {
    if (!j.at("transitions").is_array()) throw ConfigError(where + ": transitions must be an array");
    spec.transitions.clear();
    for (const auto& t : j.at("transitions")) {
      reject_unknown(t, {"from", "to", "seasonal"}, where + ".transitions");
      spec.transitions.push_back({get<int>(t, "from", where + ".transitions") - 1,
                                  get<int>(t, "to", where + ".transitions") - 1,
                                  get_or<bool>(t, "seasonal", where + ".transitions", kind == "seasonal")});
    }
  }
  if (j.contains("covariate") && !j.at("covariate").is_null()) spec.covariate = get<std::string>(j, "covariate", where);
  spec.per_state_mortality = get_or<bool>(j, "per_state_mortality", where, false);
  if (j.contains("initial")) spec.initial = get<std::map<std::string, double>>(j, "initial", where);
  try {
    spec.validate();
    const ParamVector layout = parameter_layout(spec);
    for (const auto& [name, v] : spec.initial) {
      if (std::find(layout.names.begin(), layout.names.end(), name) == layout.names.end()) {
        throw ConfigError(where + ": initial value for unknown parameter '" + name + "'");
      }
    }
    default_initial(spec);
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  return spec;
}

Json model_to_json(const ModelSpec& spec) {
  Json j;
  j["alive_states"] = spec.alive_states;
  j["period"] = spec.period;
  j["interval_length"] = spec.interval_length;
  if (spec.study_span > 0.0) j["study_span"] = spec.study_span;
  Json links = Json::array();
  for (const auto& t : spec.transitions) links.push_back({{"from", t.from + 1}, {"to", t.to + 1}, {"seasonal", t.seasonal}});
  j["transitions"] = links;
  if (spec.covariate) j["covariate"] = *spec.covariate;
  j["per_state_mortality"] = spec.per_state_mortality;
  if (!spec.initial.empty()) j["initial"] = spec.initial;
  return j;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw OutputError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw OutputError("cannot write " + path);
}

ModelSpec load_model(const std::string& path) {
  Json j;
  try {
    j = read_json_file(path);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  return model_from_json(j);
}

SimConfig sim_config_from_json(const Json& j) {
  const std::string where = "config";
  reject_unknown(j, {"model", "truth", "individuals", "span_days", "occasion_means", "covariate_probability"}, where);
  SimConfig c;
  c.model = model_from_json(get<Json>(j, "model", where));
  c.truth = get<std::map<std::string, double>>(j, "truth", where);
  c.individuals = get<int>(j, "individuals", where);
  c.span_days = get<double>(j, "span_days", where);
  c.occasion_means = get<std::vector<double>>(j, "occasion_means", where);
  c.covariate_probability = get_or<double>(j, "covariate_probability", where, c.covariate_probability);
  try {
    c.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  return c;
}

Json sim_config_to_json(const SimConfig& config) {
  Json j;
  j["model"] = model_to_json(config.model);
  j["truth"] = config.truth;
  j["individuals"] = config.individuals;
  j["span_days"] = config.span_days;
  j["occasion_means"] = config.occasion_means;
  j["covariate_probability"] = config.covariate_probability;
  return j;
}

SimConfig load_sim_config(const std::string& path) {
  Json j;
  try {
    j = read_json_file(path);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  return sim_config_from_json(j);
}

Json fit_report(const FitResult& fit, const ReportContext& context, double level) {
  Json j;
  j["model"] = model_to_json(fit.spec);
  j["interval_length"] = fit.l_used;
  j["individuals"] = fit.individuals;
  j["loglik"] = number_or_null(fit.loglik);
  j["aic"] = number_or_null(fit.aic());
  j["converged"] = fit.converged;
  j["message"] = fit.message;
  j["iterations"] = fit.iterations;
  j["evaluations"] = fit.evaluations;
  j["gradient_norm"] = number_or_null(fit.gradient_norm);
  j["seed"] = context.seed;
  j["starts"] = context.starts;
  j["best_start"] = fit.best_start;
  Json starts = Json::array();
  for (double ll : fit.start_logliks) starts.push_back(number_or_null(ll));
  j["start_logliks"] = starts;
  if (!context.data_dir.empty()) j["data"] = context.data_dir;
  j["interval_level"] = level;

  Json params = Json::array();
  for (const auto& w : wald_intervals(fit, level)) {
    Json p;
    p["name"] = w.name;
    p["working"] = fit.mle[w.name];
    p["natural"] = w.estimate;
    p["standard_error"] = w.available ? Json(w.standard_error) : Json(nullptr);
    p["lower"] = number_or_null(w.lower);
    p["upper"] = number_or_null(w.upper);
    params.push_back(p);
  }
  j["parameters"] = params;
  j["hessian_singular"] = fit.hessian_singular;
  j["hessian_asymmetry"] = number_or_null(fit.hessian_asymmetry);
  if (fit.covariance) {
    Json cov = Json::array();
    for (Eigen::Index r = 0; r < fit.covariance->rows(); ++r) {
      Json row = Json::array();
      for (Eigen::Index c = 0; c < fit.covariance->cols(); ++c) row.push_back((*fit.covariance)(r, c));
      cov.push_back(row);
    }
    j["covariance"] = cov;
  } else {
    j["covariance"] = nullptr;
  }
  j["wall_time"] = fit.wall_time;
  return j;
}

FitResult fit_from_report(const Json& report) {
  FitResult fit;
  try {
    fit.spec = model_from_json(report.at("model"));
    fit.mle = parameter_layout(fit.spec);
    const Json& params = report.at("parameters");
    if (static_cast<int>(params.size()) != fit.mle.size()) {
      throw MismatchError("fit report lists " + std::to_string(params.size()) + " parameters but its model has " +
                          std::to_string(fit.mle.size()));
    }
    for (int i = 0; i < fit.mle.size(); ++i) {
      if (params[i].at("name").get<std::string>() != fit.mle.names[i]) {
        throw MismatchError("fit report parameter '" + params[i].at("name").get<std::string>() +
                            "' does not match the model's '" + fit.mle.names[i] + "'");
      }
      fit.mle.values[i] = params[i].at("working").get<double>();
    }
    fit.loglik = number_from(report.at("loglik"));
    fit.converged = report.at("converged").get<bool>();
    fit.l_used = report.at("interval_length").get<double>();
    fit.individuals = report.value("individuals", 0);
    fit.message = report.value("message", "");
    fit.hessian_singular = report.value("hessian_singular", false);
    const Json& cov = report.at("covariance");
    if (!cov.is_null()) {
      const auto n = fit.mle.size();
      Eigen::MatrixXd m(n, n);
      if (static_cast<int>(cov.size()) != n) throw MismatchError("fit report covariance has the wrong size");
      for (int r = 0; r < n; ++r) {
        if (static_cast<int>(cov[r].size()) != n) throw MismatchError("fit report covariance has the wrong size");
        for (int c = 0; c < n; ++c) m(r, c) = cov[r][c].get<double>();
      }
      fit.covariance = m;
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("fit report: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("fit report: ") + e.what());
  }
  return fit;
}

FitResult load_fit_report(const std::string& path) { return fit_from_report(read_json_file(path)); }

Json truth_record(const SimConfig& config, const Simulation& sim) {
  Json j;
  j["parameters"] = config.truth;
  j["individuals_simulated"] = config.individuals;
  j["individuals_detected"] = sim.data.histories.size();
  j["occasions"] = sim.data.grid.occasions();
  std::set<std::string> detected;
  for (const auto& h : sim.data.histories) detected.insert(h.id);
  Json paths = Json::array();
  for (std::size_t i = 0; i < sim.trajectories.size(); ++i) {
    const Trajectory& t = sim.trajectories[i];
    const std::string id = individual_id(static_cast<int>(i));
    Json p;
    p["id"] = id;
    p["detected"] = detected.count(id) == 1;
    if (config.model.covariate) p[*config.model.covariate] = t.level;
    p["times"] = t.times;
    Json states = Json::array();
    for (int s : t.states) states.push_back(s + 1);
    p["states"] = states;
    paths.push_back(p);
  }
  j["paths"] = paths;
  return j;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

Json RunManifest::to_json() const {
  Json j;
  j["command"] = command;
  j["config"] = config_path.empty() ? Json(nullptr) : Json(config_path);
  j["seed"] = seed ? Json(*seed) : Json(nullptr);
  j["version"] = version;
  Json in = Json::object();
  for (const auto& path : inputs) in[path] = sha256_file(path);
  j["inputs"] = in;
  j["outputs"] = outputs;
  j["wall_time"] = wall_time;
  j["details"] = details;
  return j;
}

std::string code_version() { return CTMSM_VERSION; }

}  // namespace ctmsm
