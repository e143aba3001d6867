#include "ctmsm/model.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include "ctmsm/error.hpp"

namespace ctmsm {
namespace {

constexpr double kMaxPredictor = 700.0;

std::string level_suffix(const ModelSpec& spec, int level) {
  if (!spec.covariate) return {};
  return "[" + *spec.covariate + "=" + std::to_string(level) + "]";
}

std::string link_prefix(const TransitionLink& link) {
  return "q" + std::to_string(link.from + 1) + std::to_string(link.to + 1);
}

double checked_exp(double predictor, const std::string& name) {
  if (!std::isfinite(predictor) || std::abs(predictor) > kMaxPredictor) {
    throw NumericRangeError("linear predictor out of range for " + name);
  }
  return std::exp(predictor);
}

}  // namespace

ModelSpec ModelSpec::seasonal(int alive_states, double interval_length) {
  ModelSpec s;
  s.alive_states = alive_states;
  s.interval_length = interval_length;
  for (int j = 0; j < alive_states; ++j) {
    for (int k = 0; k < alive_states; ++k) {
      if (j != k) s.transitions.push_back({j, k, true});
    }
  }
  return s;
}

ModelSpec ModelSpec::homogeneous(int alive_states) {
  ModelSpec s = seasonal(alive_states);
  for (auto& t : s.transitions) t.seasonal = false;
  return s;
}

void ModelSpec::validate() const {
  if (alive_states < 1 || alive_states >= kMaxStates) {
    throw InvalidInput("model: alive_states must be in 1.." + std::to_string(kMaxStates - 1));
  }
  if (!(period > 0.0) || !std::isfinite(period)) throw InvalidInput("model: period must be positive");
  if (!(interval_length > 0.0) || !std::isfinite(interval_length)) {
    throw InvalidInput("model: interval_length must be positive");
  }
  if (!(study_span >= 0.0) || !std::isfinite(study_span)) throw InvalidInput("model: study_span must be >= 0");
  std::set<std::pair<int, int>> seen;
  for (const auto& t : transitions) {
    if (t.from < 0 || t.to < 0 || t.from >= alive_states || t.to >= alive_states || t.from == t.to) {
      throw InvalidInput("model: transition " + link_prefix(t) + " does not join two distinct alive states");
    }
    if (!seen.insert({t.from, t.to}).second) throw InvalidInput("model: duplicate transition " + link_prefix(t));
  }
  if (covariate && covariate->empty()) throw InvalidInput("model: empty covariate name");
}

int ParamVector::index(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  throw InvalidInput("unknown parameter '" + name + "'");
}

ParamVector parameter_layout(const ModelSpec& spec) {
  spec.validate();
  ParamVector p;
  auto add = [&](std::string name, ParamKind kind) {
    p.names.push_back(std::move(name));
    p.kinds.push_back(kind);
  };
  for (int level = 0; level < spec.levels(); ++level) {
    const std::string sfx = level_suffix(spec, level);
    for (const auto& t : spec.transitions) {
      const std::string pre = link_prefix(t);
      add(pre + ".intercept" + sfx, ParamKind::Coefficient);
      if (t.seasonal) {
        add(pre + ".sin" + sfx, ParamKind::Coefficient);
        add(pre + ".cos" + sfx, ParamKind::Coefficient);
      }
    }
  }
  if (spec.per_state_mortality) {
    for (int m = 0; m < spec.alive_states; ++m) add("death.intercept." + std::to_string(m + 1), ParamKind::Coefficient);
  } else {
    add("death.intercept", ParamKind::Coefficient);
  }
  if (spec.covariate) add("death." + *spec.covariate, ParamKind::Coefficient);
  for (int m = 0; m < spec.alive_states; ++m) add("p" + std::to_string(m + 1), ParamKind::Probability);
  p.values = Eigen::VectorXd::Zero(static_cast<int>(p.names.size()));
  return p;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidInput("logit: probability must lie in (0,1)");
  return std::log(p / (1.0 - p));
}

ParamVector default_initial(const ModelSpec& spec) {
  ParamVector p = parameter_layout(spec);
  for (int i = 0; i < p.size(); ++i) {
    const std::string& n = p.names[i];
    double v = 0.0;
    if (n.find(".intercept") != std::string::npos) {
      v = n.rfind("death.", 0) == 0 ? std::log(1.0 / 3650.0) : std::log(1.0 / 100.0);
    }
    if (const auto it = spec.initial.find(n); it != spec.initial.end()) {
      v = p.kinds[i] == ParamKind::Probability ? logit(it->second) : it->second;
    }
    p.values[i] = v;
  }
  for (const auto& [name, value] : spec.initial) p.index(name);
  return p;
}

std::vector<NamedValue> natural_parameters(const ModelSpec& spec, const ParamVector& params) {
  const ParamVector layout = parameter_layout(spec);
  if (layout.names != params.names) throw InvalidInput("parameter vector does not match the model");
  std::vector<NamedValue> out;
  for (int i = 0; i < params.size(); ++i) {
    const double w = params.values[i];
    out.push_back({params.names[i], params.kinds[i] == ParamKind::Probability ? logistic(w) : w});
  }
  return out;
}

ParamVector working_from_natural(const ModelSpec& spec, const std::map<std::string, double>& natural) {
  ParamVector p = parameter_layout(spec);
  for (int i = 0; i < p.size(); ++i) {
    const auto it = natural.find(p.names[i]);
    if (it == natural.end()) throw InvalidInput("missing value for parameter '" + p.names[i] + "'");
    p.values[i] = p.kinds[i] == ParamKind::Probability ? logit(it->second) : it->second;
  }
  if (static_cast<int>(natural.size()) != p.size()) {
    for (const auto& [name, v] : natural) p.index(name);
  }
  return p;
}

Partition::Partition(double length, double span) : length_(length), span_(span) {
  if (!(length > 0.0) || !std::isfinite(length)) throw InvalidInput("partition: interval length must be positive");
  if (!(span >= 0.0) || !std::isfinite(span)) throw InvalidInput("partition: span must be non-negative");
  count_ = std::max(1, static_cast<int>(std::ceil(span / length)));
}

int Partition::index_of(double t) const {
  if (!(t >= 0.0) || t > span_) throw InvalidInterval("time outside the partitioned study period");
  const int r = static_cast<int>(std::floor(t / length_));
  return std::min(r, count_ - 1);
}

int covariate_level(const ModelSpec& spec, const std::map<std::string, double>& covariates) {
  if (!spec.covariate) return 0;
  const auto it = covariates.find(*spec.covariate);
  if (it == covariates.end()) throw InvalidInput("individual lacks covariate '" + *spec.covariate + "'");
  if (it->second != 0.0 && it->second != 1.0) {
    throw InvalidInput("covariate '" + *spec.covariate + "' must be 0 or 1");
  }
  return static_cast<int>(it->second);
}

IntensityModel::IntensityModel(const ModelSpec& spec, const ParamVector& params) : spec_(spec) {
  const ParamVector layout = parameter_layout(spec);
  if (layout.names != params.names) throw InvalidInput("parameter vector does not match the model");
  for (int i = 0; i < params.size(); ++i) {
    if (!std::isfinite(params.values[i])) throw InvalidInput("non-finite parameter '" + params.names[i] + "'");
  }
  int i = 0;
  links_.resize(spec.levels());
  for (int level = 0; level < spec.levels(); ++level) {
    for (const auto& t : spec.transitions) {
      Coefs c;
      c.name = params.names[i];
      c.intercept = params.values[i++];
      if (t.seasonal) {
        c.sin = params.values[i++];
        c.cos = params.values[i++];
      }
      links_[level].push_back(c);
    }
  }
  std::vector<double> intercepts;
  std::vector<std::string> intercept_names;
  for (int m = 0; m < (spec.per_state_mortality ? spec.alive_states : 1); ++m) {
    intercept_names.push_back(params.names[i]);
    intercepts.push_back(params.values[i++]);
  }
  const double effect = spec.covariate ? params.values[i++] : 0.0;
  death_.assign(spec.levels(), std::vector<double>(spec.alive_states));
  for (int level = 0; level < spec.levels(); ++level) {
    for (int m = 0; m < spec.alive_states; ++m) {
      const int k = spec.per_state_mortality ? m : 0;
      death_[level][m] = checked_exp(intercepts[k] + effect * level, intercept_names[k]);
    }
  }
  detection_.resize(spec.alive_states);
  for (int m = 0; m < spec.alive_states; ++m) detection_[m] = logistic(params.values[i++]);
}

double IntensityModel::transition_rate(int link, double y, int level) const {
  const Coefs& c = links_.at(level).at(link);
  double eta = c.intercept;
  if (c.sin != 0.0 || c.cos != 0.0) {
    const double angle = 2.0 * std::numbers::pi * y / spec_.period;
    eta += c.sin * std::sin(angle) + c.cos * std::cos(angle);
  }
  return checked_exp(eta, c.name);
}

double IntensityModel::death_rate(int state, int level) const { return death_.at(level).at(state); }

IntensityMatrix IntensityModel::at(double y, int level) const {
  const int n = spec_.states();
  Mat rates = Mat::Zero(n, n);
  for (std::size_t l = 0; l < spec_.transitions.size(); ++l) {
    const auto& t = spec_.transitions[l];
    rates(t.from, t.to) = transition_rate(static_cast<int>(l), y, level);
  }
  for (int m = 0; m < spec_.alive_states; ++m) rates(m, n - 1) = death_[level][m];
  return IntensityMatrix::from_rates(std::move(rates));
}

IntensityMatrix intensity_at(const ModelSpec& spec, const ParamVector& params, int r,
                             const std::map<std::string, double>& covariates) {
  const Partition partition(spec.interval_length, spec.study_span);
  if (r < 0 || r >= partition.count()) throw InvalidInput("interval index out of range");
  return IntensityModel(spec, params).at(partition.midpoint(r), covariate_level(spec, covariates));
}

PiecewiseTransitions::PiecewiseTransitions(const IntensityModel& model, const Partition& partition, int level)
    : model_(&model),
      partition_(partition),
      level_(level),
      intensities_(partition.count()),
      full_(partition.count()) {}

const IntensityMatrix& PiecewiseTransitions::intensity(int r) {
  auto& slot = intensities_.at(r);
  if (!slot) slot.emplace(model_->at(partition_.midpoint(r), level_));
  return *slot;
}

const TransitionMatrix& PiecewiseTransitions::full(int r) {
  auto& slot = full_.at(r);
  if (!slot) slot.emplace(matrix_exponential(intensity(r), partition_.upper(r) - partition_.lower(r)));
  return *slot;
}

TransitionMatrix PiecewiseTransitions::between(double t_a, double t_b) {
  if (!(t_b >= t_a)) throw InvalidInterval("transition requested backwards in time");
  const int ra = partition_.index_of(t_a);
  const int rb = partition_.index_of(t_b);
  if (ra == rb) return matrix_exponential(intensity(ra), t_b - t_a);
  TransitionMatrix g = matrix_exponential(intensity(ra), partition_.upper(ra) - t_a);
  for (int v = ra + 1; v < rb; ++v) g = g * full(v);
  return g * matrix_exponential(intensity(rb), t_b - partition_.lower(rb));
}

TransitionMatrix transition_matrix_between(const ModelSpec& spec, const ParamVector& params, double t_a,
                                           double t_b, const std::map<std::string, double>& covariates) {
  if (!(t_b >= t_a)) throw InvalidInterval("transition requested backwards in time");
  const IntensityModel model(spec, params);
  PiecewiseTransitions pw(model, Partition(spec.interval_length, spec.study_span),
                          covariate_level(spec, covariates));
  return pw.between(t_a, t_b);
}

}  // namespace ctmsm
