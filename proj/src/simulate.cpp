#include "ctmsm/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "ctmsm/error.hpp"
#include "ctmsm/parallel.hpp"

namespace ctmsm {
namespace {

constexpr std::uint64_t kSurveyStream = 0xC0FFEEULL << 32;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t trajectory_stream(int index) { return 2ULL * static_cast<std::uint64_t>(index); }
std::uint64_t detection_stream(int index) { return 2ULL * static_cast<std::uint64_t>(index) + 1; }

// Covariate level and initial state come first from the individual's stream, then the path.
Trajectory trajectory_for(const SimConfig& config, const DailyIntensities& rates, int index) {
  auto rng = derive_rng(config.seed, trajectory_stream(index));
  const int level =
      config.model.covariate ? (std::bernoulli_distribution(config.covariate_probability)(rng) ? 1 : 0) : 0;
  const int initial = std::uniform_int_distribution<int>(0, config.model.alive_states - 1)(rng);
  return simulate_path(rates, level, initial, 0.0, config.span_days, rng);
}

}  // namespace

void SimConfig::validate() const {
  model.validate();
  if (individuals < 1) throw InvalidInput("config: individuals must be at least 1");
  if (!(span_days > 0.0) || !std::isfinite(span_days)) throw InvalidInput("config: span_days must be positive");
  if (static_cast<int>(occasion_means.size()) != model.alive_states) {
    throw InvalidInput("config: occasion_means needs one value per area");
  }
  for (double l : occasion_means) {
    if (!(l > 0.0) || !std::isfinite(l)) throw InvalidInput("config: occasion_means must be positive");
  }
  if (!(covariate_probability >= 0.0 && covariate_probability <= 1.0)) {
    throw InvalidInput("config: covariate_probability must lie in [0,1]");
  }
  const ParamVector layout = parameter_layout(model);
  for (int i = 0; i < layout.size(); ++i) {
    const auto it = truth.find(layout.names[i]);
    if (it == truth.end()) throw InvalidInput("config: truth lacks parameter '" + layout.names[i] + "'");
    if (layout.kinds[i] == ParamKind::Probability && !(it->second > 0.0 && it->second < 1.0)) {
      throw InvalidInput("config: detection probability '" + layout.names[i] + "' must lie in (0,1)");
    }
  }
  for (const auto& [name, v] : truth) {
    if (std::find(layout.names.begin(), layout.names.end(), name) == layout.names.end()) {
      throw InvalidInput("config: unknown parameter '" + name + "' in truth");
    }
  }
}

int Trajectory::state_at(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) throw InvalidInput("trajectory queried before its start");
  return states[static_cast<std::size_t>(it - times.begin()) - 1];
}

std::mt19937_64 derive_rng(std::uint64_t master, std::uint64_t stream) {
  std::seed_seq seq{splitmix64(master), splitmix64(master ^ splitmix64(stream + 1)), stream};
  return std::mt19937_64(seq);
}

DailyIntensities::DailyIntensities(const ModelSpec& spec, const ParamVector& params) {
  const IntensityModel model(spec, params);
  days_ = std::max(1, static_cast<int>(std::ceil(spec.period)));
  homogeneous_ = true;
  for (int i = 0; i < params.size(); ++i) {
    const auto& n = params.names[i];
    if ((n.find(".sin") != std::string::npos || n.find(".cos") != std::string::npos) && params.values[i] != 0.0) {
      homogeneous_ = false;
    }
  }
  const int cycle = homogeneous_ ? 1 : days_;
  table_.resize(spec.levels());
  for (int level = 0; level < spec.levels(); ++level) {
    for (int d = 0; d < cycle; ++d) table_[level].push_back(model.at(static_cast<double>(d), level));
  }
}

const IntensityMatrix& DailyIntensities::on_day(double t, int level) const {
  if (homogeneous_) return table_[level][0];
  const auto day = static_cast<long long>(std::floor(t));
  return table_[level][static_cast<std::size_t>(day % days_)];
}

Trajectory simulate_path(const DailyIntensities& rates, int level, int initial_state, double start, double end,
                         std::mt19937_64& rng) {
  Trajectory path;
  path.level = level;
  path.times.push_back(start);
  path.states.push_back(initial_state);
  std::exponential_distribution<double> unit_exp(1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  double t = start;
  int s = initial_state;
  const int dead = rates.on_day(0.0, level).dim() - 1;
  while (t < end && s != dead) {
    const double segment_end = rates.homogeneous() ? end : std::min(std::floor(t) + 1.0, end);
    const IntensityMatrix& q = rates.on_day(t, level);
    const double out = -q(s, s);
    if (out <= 0.0) {
      if (rates.homogeneous()) break;
      t = segment_end;
      continue;
    }
    const double hold = unit_exp(rng) / out;
    if (t + hold >= segment_end) {
      t = segment_end;
      continue;
    }
    t += hold;
    double u = unit(rng) * out;
    int next = s;
    for (int k = 0; k < q.dim(); ++k) {
      if (k == s) continue;
      next = k;
      u -= q(s, k);
      if (u < 0.0) break;
    }
    s = next;
    path.times.push_back(t);
    path.states.push_back(s);
  }
  return path;
}

Trajectory simulate_trajectory(const SimConfig& config, int index) {
  const DailyIntensities rates(config.model, working_from_natural(config.model, config.truth));
  return trajectory_for(config, rates, index);
}

std::vector<double> poisson_occasions(double mean_gap, double span, std::mt19937_64& rng) {
  std::poisson_distribution<long long> gap(mean_gap);
  std::vector<double> times;
  for (double t = 0.0; t <= span; t += static_cast<double>(gap(rng))) {
    if (times.empty() || times.back() != t) times.push_back(t);
  }
  return times;
}

OccasionGrid merge_streams(const std::vector<std::vector<double>>& streams) {
  const int areas = static_cast<int>(streams.size());
  std::map<double, std::vector<int>> merged;
  for (int m = 0; m < areas; ++m) {
    for (double t : streams[m]) merged.try_emplace(t, std::vector<int>(areas, 0)).first->second[m] = 1;
  }
  OccasionGrid grid;
  for (auto& [t, flags] : merged) {
    grid.times.push_back(t);
    grid.effort.push_back(std::move(flags));
  }
  return grid;
}

OccasionGrid simulate_survey(const SimConfig& config) {
  std::vector<std::vector<double>> streams;
  for (int m = 0; m < config.model.alive_states; ++m) {
    auto rng = derive_rng(config.seed, kSurveyStream + static_cast<std::uint64_t>(m));
    streams.push_back(poisson_occasions(config.occasion_means[m], config.span_days, rng));
  }
  return merge_streams(streams);
}

std::string individual_id(int index) {
  std::ostringstream os;
  os << "ind" << std::setw(4) << std::setfill('0') << (index + 1);
  return os.str();
}

EncounterData simulate_detections(const SimConfig& config, const OccasionGrid& grid,
                                  const std::vector<Trajectory>& trajectories) {
  const int alive = config.model.alive_states;
  std::vector<double> p(alive);
  for (int m = 0; m < alive; ++m) p[m] = config.truth.at("p" + std::to_string(m + 1));

  EncounterData data;
  data.grid = grid;
  data.alive_states = alive;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    auto rng = derive_rng(config.seed, detection_stream(static_cast<int>(i)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    EncounterHistory h;
    h.id = individual_id(static_cast<int>(i));
    h.observations.assign(grid.times.size(), 0);
    for (int u = 0; u < grid.occasions(); ++u) {
      const int s = trajectories[i].state_at(grid.times[u]);
      const double draw = unit(rng);
      if (s < alive && grid.effort[u][s] == 1 && draw < p[s]) h.observations[u] = s + 1;
    }
    if (h.sightings() == 0) continue;
    h.first_capture = first_capture_of(h.observations);
    if (config.model.covariate) h.covariates[*config.model.covariate] = trajectories[i].level;
    data.histories.push_back(std::move(h));
  }
  return data;
}

Simulation simulate(const SimConfig& config, int threads) {
  config.validate();
  Simulation sim;
  const OccasionGrid grid = simulate_survey(config);
  sim.trajectories.resize(config.individuals);
  const DailyIntensities rates(config.model, working_from_natural(config.model, config.truth));
  parallel_for(sim.trajectories.size(), threads, [&](std::size_t i) {
    sim.trajectories[i] = trajectory_for(config, rates, static_cast<int>(i));
  });
  sim.data = simulate_detections(config, grid, sim.trajectories);
  return sim;
}

SimConfig reference_design() {
  SimConfig c;
  c.model = ModelSpec::seasonal(2, 30.0);
  c.truth = {{"q12.intercept", -6.5}, {"q12.sin", -0.7}, {"q12.cos", -0.2},
             {"q21.intercept", -7.0}, {"q21.sin", 0.7},  {"q21.cos", -0.4},
             {"death.intercept", -9.0}, {"p1", 0.4},     {"p2", 0.2}};
  c.individuals = 200;
  c.span_days = 3646.0;
  c.occasion_means = {10.0, 14.0};
  c.seed = 1;
  return c;
}

}  // namespace ctmsm
