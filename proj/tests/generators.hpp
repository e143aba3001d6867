#pragma once

// Random problem instances shared by unit and acceptance tests.

#include <random>

#include "ctmsm/data.hpp"
#include "ctmsm/model.hpp"

namespace ctmsm::gen {

struct Instance {
  ModelSpec spec;
  ParamVector params;
  OccasionGrid grid;
  EncounterHistory history;
};

/// Seasonal model with M alive states and random coefficients of moderate size.
inline ParamVector random_params(std::mt19937_64& rng, const ModelSpec& spec) {
  std::uniform_real_distribution<double> intercept(std::log(0.005), std::log(0.2));
  std::uniform_real_distribution<double> seasonal(-1.0, 1.0);
  std::uniform_real_distribution<double> detect(-1.5, 1.5);
  ParamVector p = parameter_layout(spec);
  for (int i = 0; i < p.size(); ++i) {
    const auto& n = p.names[i];
    if (p.kinds[i] == ParamKind::Probability) {
      p.values[i] = detect(rng);
    } else if (n.find("intercept") != std::string::npos) {
      p.values[i] = intercept(rng) - (n.rfind("death", 0) == 0 ? 1.0 : 0.0);
    } else {
      p.values[i] = seasonal(rng);
    }
  }
  return p;
}

/// Random grid with irregular gaps; some occasions carry no effort at all.
inline OccasionGrid random_grid(std::mt19937_64& rng, int alive_states, int occasions) {
  std::uniform_real_distribution<double> gap(0.5, 25.0);
  OccasionGrid g;
  double t = 0.0;
  for (int u = 0; u < occasions; ++u) {
    g.times.push_back(t);
    t += gap(rng);
    std::vector<int> row(alive_states);
    for (auto& e : row) e = (rng() % 4 != 0) ? 1 : 0;
    g.effort.push_back(row);
  }
  return g;
}

/// History with at most `max_unknown` unobserved occasions after first capture.
inline EncounterHistory random_history(std::mt19937_64& rng, const OccasionGrid& grid, int alive_states,
                                       int max_unknown) {
  const int n = grid.occasions();
  EncounterHistory h;
  h.id = "r";
  h.observations.assign(n, 0);
  for (;;) {
    const int g = static_cast<int>(rng() % n);
    std::vector<int> surveyed;
    for (int m = 0; m < alive_states; ++m) {
      if (grid.effort[g][m]) surveyed.push_back(m);
    }
    if (surveyed.empty()) continue;
    h.first_capture = g;
    h.observations[g] = surveyed[rng() % surveyed.size()] + 1;
    break;
  }
  int unknown = 0;
  const double seen_prob = std::uniform_real_distribution<double>(0.0, 0.6)(rng);
  for (int u = h.first_capture + 1; u < n; ++u) {
    std::vector<int> surveyed;
    for (int m = 0; m < alive_states; ++m) {
      if (grid.effort[u][m]) surveyed.push_back(m);
    }
    const bool must_observe = unknown >= max_unknown;
    if (!surveyed.empty() && (must_observe || std::uniform_real_distribution<double>(0, 1)(rng) < seen_prob)) {
      h.observations[u] = surveyed[rng() % surveyed.size()] + 1;
    } else if (must_observe) {
      // no area surveyed: shorten the history instead
      h.observations.resize(u);
      break;
    } else {
      ++unknown;
    }
  }
  return h;
}

inline Instance random_instance(std::mt19937_64& rng, int alive_states, int max_unknown, int max_occasions = 16) {
  Instance in;
  const double lengths[] = {3.0, 7.0, 15.0, 40.0};
  in.spec = ModelSpec::seasonal(alive_states, lengths[rng() % 4]);
  in.params = random_params(rng, in.spec);
  const int occasions = 2 + static_cast<int>(rng() % (max_occasions - 1));
  in.grid = random_grid(rng, alive_states, occasions);
  in.grid.effort[0].assign(alive_states, 1);
  in.history = random_history(rng, in.grid, alive_states, max_unknown);
  const int kept = static_cast<int>(in.history.observations.size());
  in.grid.times.resize(kept);
  in.grid.effort.resize(kept);
  return in;
}

}  // namespace ctmsm::gen
