#include "ctmsm/likelihood.hpp"

#include <cmath>
#include <limits>

#include "ctmsm/error.hpp"
#include "ctmsm/parallel.hpp"

namespace ctmsm {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

void check_history(const OccasionGrid& grid, const EncounterHistory& h, int alive_states) {
  if (h.observations.size() != grid.times.size()) {
    throw InvalidInput("individual '" + h.id + "': history is not aligned with the occasion grid");
  }
  if (h.first_capture < 0 || h.first_capture >= grid.occasions()) {
    throw InvalidInput("individual '" + h.id + "': first capture out of range");
  }
  const int s0 = h.observations[h.first_capture];
  if (s0 < 1 || s0 > alive_states) {
    throw InvalidInput("individual '" + h.id + "': first capture is not a sighting");
  }
  for (std::size_t u = 0; u < h.observations.size(); ++u) {
    const int x = h.observations[u];
    if (x < 0 || x > alive_states) throw InvalidInput("individual '" + h.id + "': observation out of range");
    if (static_cast<int>(u) < h.first_capture && x != 0) {
      throw InvalidInput("individual '" + h.id + "': sighting before first capture");
    }
  }
}

RowVec observation_probabilities(const Eigen::VectorXd& detection, const std::vector<int>& effort, int x) {
  const int alive = static_cast<int>(detection.size());
  RowVec diag = RowVec::Zero(alive + 1);
  for (int m = 0; m < alive; ++m) {
    const double seen = detection[m] * effort[m];
    if (x == 0) {
      diag[m] = 1.0 - seen;
    } else if (x == m + 1) {
      diag[m] = seen;
    }
  }
  diag[alive] = x == 0 ? 1.0 : 0.0;
  return diag;
}

TransitionSchedule::TransitionSchedule(const IntensityModel& model, const OccasionGrid& grid,
                                       const Partition& partition, int level)
    : level_(level) {
  PiecewiseTransitions pw(model, partition, level);
  steps_.reserve(grid.times.size());
  for (std::size_t u = 1; u < grid.times.size(); ++u) steps_.push_back(pw.between(grid.times[u - 1], grid.times[u]));
}

Partition likelihood_partition(const ModelSpec& spec, const OccasionGrid& grid) {
  const double span = spec.study_span > 0.0 ? spec.study_span : grid.span();
  if (grid.span() > span) throw InvalidInput("occasion grid extends beyond the model's study span");
  return Partition(spec.interval_length, span);
}

LikelihoodContext::LikelihoodContext(const ModelSpec& spec, const ParamVector& params, const OccasionGrid& grid)
    : spec_(&spec), grid_(&grid), model_(spec, params) {
  if (grid.areas() != spec.alive_states) throw InvalidInput("effort columns do not match the number of alive states");
  const Partition partition = likelihood_partition(spec, grid);
  for (int level = 0; level < spec.levels(); ++level) schedules_.emplace_back(model_, grid, partition, level);
}

const TransitionSchedule& LikelihoodContext::schedule_for(const EncounterHistory& h) const {
  return schedules_.at(covariate_level(*spec_, h.covariates));
}

double LikelihoodContext::forward(const EncounterHistory& h) const {
  const int alive = spec_->alive_states;
  check_history(*grid_, h, alive);
  const TransitionSchedule& sched = schedule_for(h);
  const Eigen::VectorXd& p = model_.detection();

  RowVec phi = RowVec::Zero(alive + 1);
  phi[h.observations[h.first_capture] - 1] = 1.0;
  long double loglik = 0.0L;
  for (int u = h.first_capture + 1; u < grid_->occasions(); ++u) {
    phi = (phi * sched.into(u).entries()).cwiseProduct(observation_probabilities(p, grid_->effort[u], h.observations[u]));
    const double scale = phi.sum();
    if (!(scale > 0.0)) return kNegInf;
    loglik += std::log(static_cast<long double>(scale));
    phi /= scale;
  }
  return static_cast<double>(loglik);
}

double individual_loglik_forward(const ModelSpec& spec, const ParamVector& params, const OccasionGrid& grid,
                                 const EncounterHistory& history) {
  return LikelihoodContext(spec, params, grid).forward(history);
}

double individual_loglik_bruteforce(const ModelSpec& spec, const ParamVector& params, const OccasionGrid& grid,
                                    const EncounterHistory& history, int max_unknown) {
  const int alive = spec.alive_states;
  check_history(grid, history, alive);
  int unknown = 0;
  for (int u = history.first_capture + 1; u < grid.occasions(); ++u) unknown += history.observations[u] == 0;
  if (unknown > max_unknown) {
    throw EnumerationLimit("brute-force likelihood: " + std::to_string(unknown) +
                           " unobserved occasions exceed the limit of " + std::to_string(max_unknown));
  }
  const LikelihoodContext ctx(spec, params, grid);
  const TransitionSchedule& sched = ctx.schedule_for(history);
  const Eigen::VectorXd& p = ctx.model().detection();
  const int last = grid.occasions() - 1;

  // Depth-first over occasions; each node fixes the state at occasion u.
  double total = kNegInf;
  auto visit = [&](auto&& self, int u, int prev, double log_weight) -> void {
    if (u > last) {
      total = log_add(total, log_weight);
      return;
    }
    const int x = history.observations[u];
    const RowVec pr = observation_probabilities(p, grid.effort[u], x);
    for (int s = 0; s <= alive; ++s) {
      if (x != 0 && s != x - 1) continue;
      const double w = sched.into(u)(prev, s) * pr[s];
      if (w <= 0.0) continue;
      self(self, u + 1, s, log_weight + std::log(w));
    }
  };
  visit(visit, history.first_capture + 1, history.observations[history.first_capture] - 1, 0.0);
  return total;
}

std::vector<double> individual_logliks(const ModelSpec& spec, const ParamVector& params, const EncounterData& data,
                                       int threads) {
  const LikelihoodContext ctx(spec, params, data.grid);
  std::vector<double> out(data.histories.size());
  parallel_for(data.histories.size(), threads, [&](std::size_t i) {
    try {
      out[i] = ctx.forward(data.histories[i]);
    } catch (const Error& e) {
      throw InvalidInput("individual '" + data.histories[i].id + "': " + e.what());
    }
  });
  return out;
}

double total_loglik(const ModelSpec& spec, const ParamVector& params, const EncounterData& data, int threads) {
  long double sum = 0.0L;
  for (double v : individual_logliks(spec, params, data, threads)) sum += v;
  return static_cast<double>(sum);
}

}  // namespace ctmsm
