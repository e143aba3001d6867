#include "ctmsm/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include "ctmsm/error.hpp"
#include "ctmsm/likelihood.hpp"

namespace ctmsm {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSingularRatio = 1e-10;

ModelSpec bind_span(ModelSpec spec, const EncounterData& data) {
  if (spec.study_span <= 0.0) spec.study_span = data.grid.span();
  return spec;
}

double quantile_sorted(const std::vector<double>& sorted, double prob) {
  const double pos = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

Objective negative_loglik_objective(const ModelSpec& spec, const EncounterData& data, int threads) {
  const ParamVector layout = parameter_layout(spec);
  return [spec, layout, &data, threads](const Eigen::VectorXd& x) {
    ParamVector p = layout;
    p.values = x;
    try {
      const double ll = total_loglik(spec, p, data, threads);
      return std::isfinite(ll) ? -ll : kInf;
    } catch (const NumericRangeError&) {
      return kInf;
    }
  };
}

FitResult fit(const ModelSpec& spec_in, const EncounterData& data, const ParamVector& init, const FitOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  if (data.histories.empty()) throw FitError("fit: no encounter histories");
  const ModelSpec spec = bind_span(spec_in, data);
  if (parameter_layout(spec).names != init.names) throw FitError("fit: initial values do not match the model");
  if (!init.values.allFinite()) throw FitError("fit: non-finite initial values");

  const Objective objective = negative_loglik_objective(spec, data, 1);
  if (!std::isfinite(objective(init.values))) throw FitError("fit: log-likelihood is not finite at the initial values");

  OptimOptions opt;
  opt.max_iterations = options.max_iterations;
  opt.gradient_tolerance = options.gradient_tolerance;
  opt.relative_tolerance = options.relative_tolerance;
  opt.gradient_step = options.gradient_step;
  opt.hessian_step = options.hessian_step;
  opt.threads = options.threads;

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> noise(0.0, options.perturbation_sd);

  FitResult result;
  result.spec = spec;
  result.l_used = spec.interval_length;
  result.individuals = static_cast<int>(data.histories.size());
  std::optional<OptimResult> best;
  int total_evaluations = 0;
  for (int s = 0; s < std::max(1, options.starts); ++s) {
    Eigen::VectorXd x0 = init.values;
    if (s > 0) {
      for (Eigen::Index i = 0; i < x0.size(); ++i) x0[i] += noise(rng);
    }
    const OptimResult r = options.optimizer == Optimizer::Bfgs ? minimize_bfgs(objective, x0, opt)
                                                               : minimize_nelder_mead(objective, x0, opt);
    total_evaluations += r.evaluations;
    result.start_logliks.push_back(std::isfinite(r.value) ? -r.value : -kInf);
    if (std::isfinite(r.value) && (!best || r.value < best->value)) {
      best = r;
      result.best_start = s;
    }
  }
  if (!best) throw FitError("fit: every start failed");

  result.mle = init;
  result.mle.values = best->x;
  result.loglik = -best->value;
  result.converged = best->converged;
  result.message = best->message;
  result.iterations = best->iterations;
  result.gradient_norm = best->gradient_norm;

  if (options.compute_covariance) {
    const HessianEstimate h =
        numerical_hessian(objective, best->x, options.hessian_step, options.gradient_step, options.threads);
    total_evaluations += static_cast<int>(4 * best->x.size() * best->x.size());
    result.hessian = h.matrix;
    result.hessian_asymmetry = h.asymmetry;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h.matrix);
    const auto& ev = eig.eigenvalues();
    const double top = ev.cwiseAbs().maxCoeff();
    result.hessian_singular = !h.matrix.allFinite() || top == 0.0 || ev.minCoeff() <= kSingularRatio * top;
    if (!result.hessian_singular) {
      Eigen::MatrixXd cov = eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
      result.covariance = 0.5 * (cov + cov.transpose());
    }
  }
  result.evaluations = total_evaluations;
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

double normal_critical_value(double level) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidInput("confidence level must lie in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + 0.5 * level);
}

std::vector<WaldInterval> wald_intervals(const FitResult& fit, double level) {
  const double z = normal_critical_value(level);
  std::vector<WaldInterval> out;
  for (int i = 0; i < fit.mle.size(); ++i) {
    WaldInterval w;
    w.name = fit.mle.names[i];
    const bool prob = fit.mle.kinds[i] == ParamKind::Probability;
    auto natural = [&](double v) { return prob ? logistic(v) : v; };
    const double est = fit.mle.values[i];
    w.estimate = natural(est);
    if (fit.covariance) {
      const double var = (*fit.covariance)(i, i);
      if (var >= 0.0 && std::isfinite(var)) {
        w.standard_error = std::sqrt(var);
        w.lower = natural(est - z * w.standard_error);
        w.upper = natural(est + z * w.standard_error);
        w.available = true;
      }
    }
    if (!w.available) {
      w.lower = w.upper = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(w);
  }
  return out;
}

std::vector<IntensityBand> mc_intensity_bands(const FitResult& fit, const std::vector<double>& days,
                                              const BandOptions& options) {
  if (options.draws < 0 || (options.draws > 0 && options.draws < 100)) {
    throw InvalidInput("intensity bands need 0 or at least 100 draws");
  }
  const ModelSpec& spec = fit.spec;
  const int n_links = static_cast<int>(spec.transitions.size());
  std::vector<IntensityBand> bands;
  const IntensityModel plug(spec, fit.mle);
  for (int level = 0; level < spec.levels(); ++level) {
    for (int l = 0; l < n_links; ++l) {
      IntensityBand b;
      b.transition = "q" + std::to_string(spec.transitions[l].from + 1) + std::to_string(spec.transitions[l].to + 1);
      b.level = level;
      b.days = days;
      for (double d : days) b.plug_in.push_back(plug.transition_rate(l, d, level));
      b.lower = b.plug_in;
      b.upper = b.plug_in;
      bands.push_back(std::move(b));
    }
  }
  if (options.draws == 0) return bands;

  if (!fit.covariance) {
    throw CovarianceError("intensity bands: covariance unavailable (singular Hessian); consider the repair option");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(*fit.covariance);
  Eigen::VectorXd ev = eig.eigenvalues();
  const double tol = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (ev.minCoeff() < -tol) {
    if (!options.repair_covariance) {
      throw CovarianceError("intensity bands: covariance is not positive semi-definite; rerun with repair enabled");
    }
  }
  ev = ev.cwiseMax(0.0);
  const Eigen::MatrixXd root = eig.eigenvectors() * ev.cwiseSqrt().asDiagonal();

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal;
  // samples[band][day][draw]
  std::vector<std::vector<std::vector<double>>> samples(
      bands.size(), std::vector<std::vector<double>>(days.size(), std::vector<double>(options.draws)));
  ParamVector draw = fit.mle;
  Eigen::VectorXd z(fit.mle.size());
  for (int k = 0; k < options.draws; ++k) {
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
    draw.values = fit.mle.values + root * z;
    std::size_t band = 0;
    for (int level = 0; level < spec.levels(); ++level) {
      const IntensityModel model(spec, draw);
      for (int l = 0; l < n_links; ++l, ++band) {
        for (std::size_t d = 0; d < days.size(); ++d) samples[band][d][k] = model.transition_rate(l, days[d], level);
      }
    }
  }
  const double alpha = 1.0 - options.level;
  for (std::size_t band = 0; band < bands.size(); ++band) {
    for (std::size_t d = 0; d < days.size(); ++d) {
      auto& s = samples[band][d];
      std::sort(s.begin(), s.end());
      bands[band].lower[d] = quantile_sorted(s, alpha / 2.0);
      bands[band].upper[d] = quantile_sorted(s, 1.0 - alpha / 2.0);
    }
  }
  return bands;
}

IntervalSweepResult interval_sweep(const ModelSpec& spec, const EncounterData& data, std::vector<double> lengths,
                                   const ParamVector& init, const FitOptions& options) {
  for (double l : lengths) {
    if (!(l > 0.0)) throw InvalidInput("interval lengths must be positive");
  }
  std::sort(lengths.begin(), lengths.end(), std::greater<>());
  lengths.erase(std::unique(lengths.begin(), lengths.end()), lengths.end());

  IntervalSweepResult out;
  ParamVector start = init;
  bool warm = false;
  for (double l : lengths) {
    SweepRow row;
    row.interval_length = l;
    ModelSpec s = spec;
    s.interval_length = l;
    FitOptions o = options;
    if (warm) o.starts = 1;
    try {
      row.fit = fit(s, data, start, o);
      start = row.fit->mle;
      warm = true;
    } catch (const Error& e) {
      row.error = e.what();
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace ctmsm
