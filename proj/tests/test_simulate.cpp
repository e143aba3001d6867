#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ctmsm/error.hpp"
#include "ctmsm/simulate.hpp"
#include "fixtures.hpp"

using namespace ctmsm;

namespace {

ParamVector homogeneous_params(const ModelSpec& spec, const std::map<std::string, double>& natural) {
  return working_from_natural(spec, natural);
}

SimConfig small_config() {
  SimConfig c = reference_design();
  c.individuals = 40;
  c.span_days = 400.0;
  c.seed = 11;
  return c;
}

}  // namespace

TEST_CASE("path stays put without outgoing intensity") {
  ModelSpec spec = ModelSpec::homogeneous(2);
  spec.transitions.clear();
  const DailyIntensities rates(spec, homogeneous_params(spec, {{"death.intercept", -700.0}, {"p1", 0.5}, {"p2", 0.5}}));
  std::mt19937_64 rng(1);
  const Trajectory path = simulate_path(rates, 0, 1, 0.0, 1e7, rng);
  CHECK(path.states == std::vector<int>{1});
  CHECK(path.state_at(9e6) == 1);
  CHECK_THROWS_AS(path.state_at(-1.0), InvalidInput);
}

TEST_CASE("pure-death lifetimes average about 8103 days") {
  const ModelSpec spec = ModelSpec::homogeneous(1);
  const DailyIntensities rates(spec, homogeneous_params(spec, {{"death.intercept", -9.0}, {"p1", 0.5}}));
  REQUIRE(rates.homogeneous());
  std::mt19937_64 rng(2);
  const int reps = 100000;
  double sum = 0.0;
  for (int i = 0; i < reps; ++i) {
    const Trajectory path = simulate_path(rates, 0, 0, 0.0, std::numeric_limits<double>::infinity(), rng);
    REQUIRE(path.states.back() == 1);
    sum += path.times.back();
  }
  CHECK(std::abs(sum / reps / 8103.083927575383 - 1.0) < 0.02);
}

TEST_CASE("day-wise seasonal path also matches the pure-death mean") {
  ModelSpec spec = ModelSpec::seasonal(1, 30.0);
  spec.transitions.clear();
  const DailyIntensities rates(spec, homogeneous_params(spec, {{"death.intercept", -5.0}, {"p1", 0.5}}));
  std::mt19937_64 rng(3);
  const int reps = 20000;
  double sum = 0.0;
  for (int i = 0; i < reps; ++i) sum += simulate_path(rates, 0, 0, 0.0, 1e9, rng).times.back();
  CHECK(std::abs(sum / reps / std::exp(5.0) - 1.0) < 0.03);
}

TEST_CASE("symmetric two-state chain spends half its time in each state") {
  ModelSpec spec = ModelSpec::homogeneous(2);
  const DailyIntensities rates(
      spec, homogeneous_params(spec, {{"q12.intercept", std::log(0.05)},
                                      {"q21.intercept", std::log(0.05)},
                                      {"death.intercept", -700.0},
                                      {"p1", 0.5},
                                      {"p2", 0.5}}));
  std::mt19937_64 rng(4);
  const double horizon = 2e6;
  const Trajectory path = simulate_path(rates, 0, 0, 0.0, horizon, rng);
  double in_first = 0.0;
  for (std::size_t i = 0; i < path.times.size(); ++i) {
    const double next = i + 1 < path.times.size() ? path.times[i + 1] : horizon;
    if (path.states[i] == 0) in_first += next - path.times[i];
  }
  CHECK(std::abs(in_first / horizon - 0.5) < 0.01);
}

TEST_CASE("one-day transition frequencies match the matrix exponential") {
  ModelSpec spec = ModelSpec::seasonal(2, 30.0);
  auto truth = fixtures::seasonal_truth();
  truth["q12.intercept"] = -1.5;
  truth["q21.intercept"] = -2.0;
  truth["death.intercept"] = -3.0;
  const ParamVector params = working_from_natural(spec, truth);
  const DailyIntensities rates(spec, params);
  const IntensityModel model(spec, params);
  std::mt19937_64 rng(5);
  const int reps = 20000;
  for (double day : {14.0, 195.0}) {
    const Mat expected = matrix_exponential(model.at(day, 0), 1.0).entries();
    for (int from = 0; from < 2; ++from) {
      std::vector<int> counts(3, 0);
      for (int i = 0; i < reps; ++i) {
        const Trajectory path = simulate_path(rates, 0, from, day, day + 1.0, rng);
        ++counts[path.states.back()];
      }
      for (int to = 0; to < 3; ++to) {
        const double p = expected(from, to);
        const double se = std::sqrt(p * (1.0 - p) / reps);
        CHECK(std::abs(counts[to] / double(reps) - p) < 3.0 * se + 1e-12);
      }
    }
  }
}

TEST_CASE("day boundaries use the day-of-year intensities") {
  const SimConfig c = reference_design();
  const ParamVector params = working_from_natural(c.model, c.truth);
  const DailyIntensities rates(c.model, params);
  const IntensityModel model(c.model, params);
  CHECK_FALSE(rates.homogeneous());
  CHECK(rates.days_per_cycle() == 365);
  CHECK(rates.on_day(400.7, 0)(0, 1) == doctest::Approx(model.at(35.0, 0)(0, 1)).epsilon(1e-15));
  CHECK(rates.on_day(364.99, 0)(1, 0) == doctest::Approx(model.at(364.0, 0)(1, 0)).epsilon(1e-15));
}

TEST_CASE("Poisson survey streams") {
  double total = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto rng = derive_rng(seed, 99);
    const auto times = poisson_occasions(10.0, 3646.0, rng);
    CHECK(times.front() == 0.0);
    CHECK(times.back() <= 3646.0);
    CHECK(std::is_sorted(times.begin(), times.end()));
    CHECK(std::adjacent_find(times.begin(), times.end()) == times.end());
    // renewal count: mean 1 + span/10, sd about sqrt(span/10 * var/mean^2)
    CHECK(std::abs(static_cast<double>(times.size()) - 365.6) < 3.0 * std::sqrt(364.6 * 10.0 / 100.0) + 1.0);
    total += static_cast<double>(times.size());
  }
  CHECK(std::abs(total / 20.0 - 365.6) < 2.0);
}

TEST_CASE("zero gaps collapse into the previous occasion") {
  std::mt19937_64 rng(6);
  const auto times = poisson_occasions(0.3, 200.0, rng);
  CHECK(std::adjacent_find(times.begin(), times.end()) == times.end());
  CHECK(times.size() <= 201);
}

TEST_CASE("coincident streams set both effort flags") {
  auto a = derive_rng(17, 3);
  auto b = derive_rng(17, 3);
  const auto grid = merge_streams({poisson_occasions(12.0, 1000.0, a), poisson_occasions(12.0, 1000.0, b)});
  REQUIRE(grid.occasions() > 50);
  for (const auto& row : grid.effort) CHECK(row == std::vector<int>{1, 1});
}

TEST_CASE("reference survey has about 620 occasions") {
  const SimConfig c = reference_design();
  const OccasionGrid grid = simulate_survey(c);
  MESSAGE("realized occasions: " << grid.occasions());
  CHECK(grid.occasions() > 560);
  CHECK(grid.occasions() < 680);
  CHECK(grid.times.front() == 0.0);
  CHECK_NOTHROW(validate_grid(grid, 2));
}

TEST_CASE("perfect detection reveals every alive occasion") {
  SimConfig c = small_config();
  OccasionGrid grid;
  for (int u = 0; u <= 40; ++u) {
    grid.times.push_back(10.0 * u);
    grid.effort.push_back({1, 1});
  }
  std::vector<Trajectory> paths;
  for (int i = 0; i < c.individuals; ++i) paths.push_back(simulate_trajectory(c, i));
  c.truth["p1"] = 1.0;
  c.truth["p2"] = 1.0;
  const EncounterData data = simulate_detections(c, grid, paths);
  REQUIRE(data.histories.size() == paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) {
    CHECK(data.histories[i].first_capture == 0);
    for (int u = 0; u < grid.occasions(); ++u) {
      const int s = paths[i].state_at(grid.times[u]);
      CHECK(data.histories[i].observations[u] == (s < 2 ? s + 1 : 0));
    }
  }
}

TEST_CASE("zero detection leaves no individuals") {
  SimConfig c = small_config();
  std::vector<Trajectory> paths;
  for (int i = 0; i < c.individuals; ++i) paths.push_back(simulate_trajectory(c, i));
  c.truth["p1"] = 0.0;
  c.truth["p2"] = 0.0;
  const EncounterData data = simulate_detections(c, simulate_survey(c), paths);
  CHECK(data.histories.empty());
}

TEST_CASE("reference design detection frequency in area 1") {
  const SimConfig c = reference_design();
  const Simulation sim = simulate(c);
  std::map<std::string, const EncounterHistory*> by_id;
  for (const auto& h : sim.data.histories) by_id[h.id] = &h;
  long long trials = 0, hits = 0;
  for (std::size_t i = 0; i < sim.trajectories.size(); ++i) {
    const auto it = by_id.find(individual_id(static_cast<int>(i)));
    for (int u = 0; u < sim.data.grid.occasions(); ++u) {
      if (sim.data.grid.effort[u][0] == 0 || sim.trajectories[i].state_at(sim.data.grid.times[u]) != 0) continue;
      ++trials;
      hits += it != by_id.end() && it->second->observations[u] == 1;
    }
  }
  const double freq = static_cast<double>(hits) / static_cast<double>(trials);
  CHECK(std::abs(freq - 0.4) < 4.0 * std::sqrt(0.24 / static_cast<double>(trials)));
  MESSAGE("realized individuals: " << sim.data.histories.size());
  CHECK(sim.data.histories.size() > 150);
}

TEST_CASE("simulation is deterministic and thread-count independent") {
  const SimConfig c = small_config();
  const Simulation a = simulate(c, 1);
  const Simulation b = simulate(c, 3);
  CHECK(a.data.grid.times == b.data.grid.times);
  CHECK(a.data.grid.effort == b.data.grid.effort);
  REQUIRE(a.data.histories.size() == b.data.histories.size());
  for (std::size_t i = 0; i < a.data.histories.size(); ++i) {
    CHECK(a.data.histories[i].id == b.data.histories[i].id);
    CHECK(a.data.histories[i].observations == b.data.histories[i].observations);
  }
  for (std::size_t i = 0; i < a.trajectories.size(); ++i) CHECK(a.trajectories[i].times == b.trajectories[i].times);
  SimConfig other = c;
  other.seed = 12;
  CHECK(simulate(other).data.grid.times != a.data.grid.times);
}

TEST_CASE("simulated data satisfy the data invariants") {
  SimConfig c = small_config();
  c.model.covariate = "sex";
  c.truth.clear();
  for (const auto& name : parameter_layout(c.model).names) {
    c.truth[name] = name[0] == 'p' ? 0.4 : name.find("intercept") != std::string::npos ? -6.0 : 0.1;
  }
  const Simulation sim = simulate(c);
  REQUIRE_FALSE(sim.data.histories.empty());
  CHECK_NOTHROW(validate_grid(sim.data.grid, 2));
  for (const auto& h : sim.data.histories) {
    CHECK_NOTHROW(validate_history(h, sim.data.grid, 2));
    CHECK(h.covariates.count("sex") == 1);
  }
}

TEST_CASE("derived streams are distinct") {
  auto a = derive_rng(1, 0), b = derive_rng(1, 1), c = derive_rng(2, 0), d = derive_rng(1, 0);
  const auto x = a();
  CHECK(x != b());
  CHECK(x != c());
  CHECK(x == d());
}

TEST_CASE("configuration validation") {
  SimConfig c = reference_design();
  CHECK_NOTHROW(c.validate());
  auto expect = [](SimConfig bad, const std::string& fragment) {
    try {
      bad.validate();
      FAIL("expected InvalidInput");
    } catch (const InvalidInput& e) {
      CHECK(std::string(e.what()).find(fragment) != std::string::npos);
    }
  };
  SimConfig bad = c;
  bad.individuals = 0;
  expect(bad, "individuals");
  bad = c;
  bad.occasion_means = {10.0};
  expect(bad, "occasion_means");
  bad = c;
  bad.occasion_means = {10.0, 0.0};
  expect(bad, "occasion_means");
  bad = c;
  bad.truth["p1"] = 1.0;
  expect(bad, "p1");
  bad = c;
  bad.truth.erase("q21.cos");
  expect(bad, "q21.cos");
  bad = c;
  bad.truth["q13.intercept"] = 0.0;
  expect(bad, "q13.intercept");
  bad = c;
  bad.span_days = -1.0;
  expect(bad, "span_days");
  bad = c;
  bad.covariate_probability = 1.5;
  expect(bad, "covariate_probability");
}
