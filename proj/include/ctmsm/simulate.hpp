#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "ctmsm/data.hpp"
#include "ctmsm/model.hpp"

namespace ctmsm {

struct SimConfig {
  ModelSpec model;                       // link structure of the generating intensities
  std::map<std::string, double> truth;   // natural-scale parameter values
  int individuals = 200;
  double span_days = 3646.0;
  std::vector<double> occasion_means;    // mean Poisson gap (days) between occasions, per area
  std::uint64_t seed = 1;
  double covariate_probability = 0.5;    // Pr(level 1) when the model has a covariate

  /// Throws InvalidInput with a field-level message.
  void validate() const;
};

/// Piecewise-constant state path. states[i] holds on [times[i], times[i+1]); states are zero-based
/// with the death state equal to the number of alive states.
struct Trajectory {
  int level = 0;
  std::vector<double> times;
  std::vector<int> states;

  int state_at(double t) const;
};

/// Independent generator for stream `stream` of a master seed (splitmix64 mixing).
std::mt19937_64 derive_rng(std::uint64_t master, std::uint64_t stream);

/// Generator rates with the seasonal covariate held fixed within each calendar day,
/// using day-of-year floor(t) mod period.
class DailyIntensities {
 public:
  DailyIntensities(const ModelSpec& spec, const ParamVector& params);

  const IntensityMatrix& on_day(double t, int level) const;
  bool homogeneous() const { return homogeneous_; }
  int days_per_cycle() const { return days_; }

 private:
  int days_;
  bool homogeneous_;
  std::vector<std::vector<IntensityMatrix>> table_;  // [level][day of cycle]
};

/// Exact simulation of the day-wise constant chain from `initial_state` at time `start` up to `end`
/// (or until death). Residual holding times are redrawn at day boundaries. `end` may be infinite.
Trajectory simulate_path(const DailyIntensities& rates, int level, int initial_state, double start, double end,
                         std::mt19937_64& rng);

/// Trajectory for individual `index`: covariate level and initial state drawn from its own stream.
Trajectory simulate_trajectory(const SimConfig& config, int index);

/// Occasion days 0, g1, g1+g2, ... up to `span` with Poisson(mean_gap) gaps; zero gaps collapse.
std::vector<double> poisson_occasions(double mean_gap, double span, std::mt19937_64& rng);

/// Sorted union of per-area occasion times with effort flags.
OccasionGrid merge_streams(const std::vector<std::vector<double>>& streams);

/// Merged occasion grid from per-area Poisson-gap survey streams starting at day 0.
OccasionGrid simulate_survey(const SimConfig& config);

/// Thins trajectories into encounter histories; never-detected individuals are dropped.
EncounterData simulate_detections(const SimConfig& config, const OccasionGrid& grid,
                                  const std::vector<Trajectory>& trajectories);

std::string individual_id(int index);

struct Simulation {
  EncounterData data;
  std::vector<Trajectory> trajectories;   // all individuals, detected or not
};

Simulation simulate(const SimConfig& config, int threads = 1);

/// The two-area seasonal design with its published generating values, n = 200 over ten years.
SimConfig reference_design();

}  // namespace ctmsm
