#pragma once

#include <vector>

#include "ctmsm/data.hpp"
#include "ctmsm/linalg.hpp"
#include "ctmsm/model.hpp"

namespace ctmsm {

/// Throws InvalidInput unless the history is aligned with the grid and starts at a sighting.
void check_history(const OccasionGrid& grid, const EncounterHistory& h, int alive_states);

/// Diagonal of P(x) for one occasion: Pr(x | s) over all states, death last.
RowVec observation_probabilities(const Eigen::VectorXd& detection, const std::vector<int>& effort, int x);

/// Gamma(t_{u-1}, t_u) for every occasion gap of a grid, for one covariate level.
class TransitionSchedule {
 public:
  TransitionSchedule(const IntensityModel& model, const OccasionGrid& grid, const Partition& partition, int level);

  /// Transition matrix into occasion u (u >= 1).
  const TransitionMatrix& into(int u) const { return steps_.at(u - 1); }
  int level() const { return level_; }

 private:
  int level_;
  std::vector<TransitionMatrix> steps_;
};

/// Partition used for a grid: [0, spec.study_span] when set, else [0, t_T].
Partition likelihood_partition(const ModelSpec& spec, const OccasionGrid& grid);

/// Precomputed state for repeated per-individual evaluations at fixed parameters.
/// Immutable after construction, safe to share across threads.
class LikelihoodContext {
 public:
  LikelihoodContext(const ModelSpec& spec, const ParamVector& params, const OccasionGrid& grid);

  const IntensityModel& model() const { return model_; }
  const OccasionGrid& grid() const { return *grid_; }
  const TransitionSchedule& schedule(int level) const { return schedules_.at(level); }
  const TransitionSchedule& schedule_for(const EncounterHistory& h) const;

  double forward(const EncounterHistory& h) const;

 private:
  const ModelSpec* spec_;
  const OccasionGrid* grid_;
  IntensityModel model_;
  std::vector<TransitionSchedule> schedules_;
};

/// Scaled forward recursion conditioned on the first capture. Returns -inf for impossible histories.
double individual_loglik_forward(const ModelSpec& spec, const ParamVector& params, const OccasionGrid& grid,
                                 const EncounterHistory& history);

/// Exhaustive sum over compatible state sequences. Refuses more than `max_unknown` unobserved occasions.
double individual_loglik_bruteforce(const ModelSpec& spec, const ParamVector& params, const OccasionGrid& grid,
                                    const EncounterHistory& history, int max_unknown = 12);

/// Per-individual log-likelihoods in data order.
std::vector<double> individual_logliks(const ModelSpec& spec, const ParamVector& params, const EncounterData& data,
                                       int threads = 1);

/// Sum of individual log-likelihoods, reduced in data order.
double total_loglik(const ModelSpec& spec, const ParamVector& params, const EncounterData& data, int threads = 1);

}  // namespace ctmsm
