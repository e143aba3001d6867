#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctmsm/linalg.hpp"

namespace ctmsm {

/// Log-linear link for one alive-to-alive transition, states zero-based.
/// With `seasonal` the predictor is b0 + b1 sin(2 pi y / period) + b2 cos(2 pi y / period).
struct TransitionLink {
  int from = 0;
  int to = 1;
  bool seasonal = true;
};

struct ModelSpec {
  int alive_states = 2;
  double period = 365.0;
  double interval_length = 30.0;
  /// Last occasion time t_T; the partition covers [0, study_span].
  double study_span = 0.0;
  std::vector<TransitionLink> transitions;
  /// Binary individual covariate. When set, every transition gets one coefficient set per
  /// level and the death rate gains an additive effect on the log scale.
  std::optional<std::string> covariate;
  /// Separate death intercept per alive state instead of one shared intercept.
  bool per_state_mortality = false;
  /// Natural-scale starting values by parameter name; missing names use the defaults.
  std::map<std::string, double> initial;

  int states() const { return alive_states + 1; }
  int levels() const { return covariate ? 2 : 1; }

  /// All ordered alive pairs with seasonal links.
  static ModelSpec seasonal(int alive_states, double interval_length = 30.0);
  /// All ordered alive pairs with constant intensities.
  static ModelSpec homogeneous(int alive_states);

  /// Throws InvalidInput on inconsistent fields.
  void validate() const;
};

enum class ParamKind { Coefficient, Probability };

/// Flat working-scale parameter vector. Probabilities are stored as logits.
struct ParamVector {
  std::vector<std::string> names;
  std::vector<ParamKind> kinds;
  Eigen::VectorXd values;

  int size() const { return static_cast<int>(values.size()); }
  int index(const std::string& name) const;
  double operator[](const std::string& name) const { return values[index(name)]; }
};

/// Parameter names and kinds implied by `spec`, in canonical order:
/// transition coefficients (per covariate level), death coefficients, detection probabilities.
ParamVector parameter_layout(const ModelSpec& spec);

/// Defaults: p = 0.5, intercepts log(1/100), seasonal 0, death intercept log(1/3650),
/// then overridden by `spec.initial`.
ParamVector default_initial(const ModelSpec& spec);

struct NamedValue {
  std::string name;
  double value = 0.0;
};

/// Natural-scale view: probabilities on [0,1], log-linear coefficients unchanged.
std::vector<NamedValue> natural_parameters(const ModelSpec& spec, const ParamVector& params);

/// Inverse of natural_parameters. Every parameter must be present.
ParamVector working_from_natural(const ModelSpec& spec, const std::map<std::string, double>& natural);

double logistic(double x);
double logit(double p);

/// Partition of [0, span] into intervals [b_{r-1}, b_r) of length l; the last may be shorter.
class Partition {
 public:
  Partition(double length, double span);

  int count() const { return count_; }
  double length() const { return length_; }
  double span() const { return span_; }
  double lower(int r) const { return r * length_; }
  double upper(int r) const { return r + 1 == count_ ? span_ : (r + 1) * length_; }
  double midpoint(int r) const { return 0.5 * (lower(r) + upper(r)); }
  /// Zero-based interval containing t; t == span maps to the last interval.
  int index_of(double t) const;

 private:
  double length_;
  double span_;
  int count_;
};

/// Covariate level (0 or 1) of an individual under `spec`.
int covariate_level(const ModelSpec& spec, const std::map<std::string, double>& covariates);

/// Evaluates the link functions for fixed parameters.
class IntensityModel {
 public:
  IntensityModel(const ModelSpec& spec, const ParamVector& params);

  /// Generator with the seasonal covariate evaluated at calendar time `y` (days).
  IntensityMatrix at(double y, int level) const;
  /// Off-diagonal alive-to-alive rate for a transition link index.
  double transition_rate(int link, double y, int level) const;
  double death_rate(int state, int level) const;
  const Eigen::VectorXd& detection() const { return detection_; }
  const ModelSpec& spec() const { return spec_; }

 private:
  struct Coefs {
    double intercept = 0.0;
    double sin = 0.0;
    double cos = 0.0;
    std::string name;
  };

  ModelSpec spec_;
  std::vector<std::vector<Coefs>> links_;   // [level][link]
  std::vector<std::vector<double>> death_;  // [level][state]
  Eigen::VectorXd detection_;
};

/// Generator for partition interval `r` (zero-based), covariate evaluated at the interval midpoint.
IntensityMatrix intensity_at(const ModelSpec& spec, const ParamVector& params, int r,
                             const std::map<std::string, double>& covariates);

/// Piecewise-constant transition matrices for one covariate level.
/// Full-interval exponentials are cached; not thread-safe, use one instance per thread.
class PiecewiseTransitions {
 public:
  PiecewiseTransitions(const IntensityModel& model, const Partition& partition, int level);

  const IntensityMatrix& intensity(int r);
  TransitionMatrix between(double t_a, double t_b);

 private:
  const TransitionMatrix& full(int r);

  const IntensityModel* model_;
  Partition partition_;
  int level_;
  std::vector<std::optional<IntensityMatrix>> intensities_;
  std::vector<std::optional<TransitionMatrix>> full_;
};

/// Gamma(t_a, t_b) under the piecewise-constant approximation.
TransitionMatrix transition_matrix_between(const ModelSpec& spec, const ParamVector& params, double t_a,
                                           double t_b, const std::map<std::string, double>& covariates);

}  // namespace ctmsm
