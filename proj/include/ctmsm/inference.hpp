#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctmsm/data.hpp"
#include "ctmsm/model.hpp"
#include "ctmsm/optimize.hpp"

namespace ctmsm {

enum class Optimizer { Bfgs, NelderMead };

struct FitOptions {
  Optimizer optimizer = Optimizer::Bfgs;
  int starts = 5;                  // user start plus perturbed copies
  double perturbation_sd = 0.5;    // working scale
  std::uint64_t seed = 1;
  int max_iterations = 500;
  double gradient_tolerance = 1e-5;
  double relative_tolerance = 1e-9;
  double gradient_step = 1e-6;
  double hessian_step = 1e-4;
  bool compute_covariance = true;
  int threads = 1;
};

struct FitResult {
  ModelSpec spec;                 // with study_span bound to the data
  ParamVector mle;
  double loglik = 0.0;
  Eigen::MatrixXd hessian;        // of the negative log-likelihood, working scale
  std::optional<Eigen::MatrixXd> covariance;
  bool hessian_singular = false;
  double hessian_asymmetry = 0.0;
  bool converged = false;
  std::string message;
  int iterations = 0;
  int evaluations = 0;
  double gradient_norm = 0.0;
  double l_used = 0.0;
  double wall_time = 0.0;         // seconds
  int best_start = 0;
  std::vector<double> start_logliks;
  int individuals = 0;

  double aic() const { return -2.0 * loglik + 2.0 * mle.size(); }
};

/// Negative total log-likelihood on the working scale; +inf where the model cannot be evaluated.
Objective negative_loglik_objective(const ModelSpec& spec, const EncounterData& data, int threads = 1);

/// Local maximizer of the total log-likelihood with multi-start. Throws FitError when the
/// log-likelihood is not finite at `init` or the data are empty.
FitResult fit(const ModelSpec& spec, const EncounterData& data, const ParamVector& init, const FitOptions& options = {});

struct WaldInterval {
  std::string name;
  double estimate = 0.0;  // natural scale
  double standard_error = 0.0;  // working scale
  double lower = 0.0;
  double upper = 0.0;
  bool available = false;
};

/// Two-sided standard normal quantile for a central interval of probability `level`.
double normal_critical_value(double level);

/// Working-scale Wald intervals mapped to the natural scale. Parameters without a usable
/// variance are flagged `available = false`.
std::vector<WaldInterval> wald_intervals(const FitResult& fit, double level = 0.95);

struct IntensityBand {
  std::string transition;   // e.g. "q12"
  int level = 0;            // covariate level
  std::vector<double> days;
  std::vector<double> plug_in;
  std::vector<double> lower;
  std::vector<double> upper;
};

struct BandOptions {
  int draws = 1000;
  double level = 0.95;
  std::uint64_t seed = 1;
  /// Clip negative covariance eigenvalues to zero instead of failing.
  bool repair_covariance = false;
};

/// Pointwise Monte-Carlo bands for every transition intensity on `days`, sampling
/// parameters from N(mle, covariance). `draws = 0` returns plug-in curves only.
std::vector<IntensityBand> mc_intensity_bands(const FitResult& fit, const std::vector<double>& days,
                                              const BandOptions& options = {});

struct SweepRow {
  double interval_length = 0.0;
  std::optional<FitResult> fit;
  std::string error;
};

struct IntervalSweepResult {
  std::vector<SweepRow> rows;   // interval lengths strictly decreasing
};

/// Fits at each interval length from longest to shortest, warm-starting each fit at the
/// previous optimum. Failed rows record the error and the sweep continues.
IntervalSweepResult interval_sweep(const ModelSpec& spec, const EncounterData& data, std::vector<double> lengths,
                                   const ParamVector& init, const FitOptions& options = {});

}  // namespace ctmsm
