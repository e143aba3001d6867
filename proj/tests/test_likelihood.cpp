#include <doctest.h>

#include <cmath>
#include <random>

#include "ctmsm/error.hpp"
#include "ctmsm/likelihood.hpp"
#include "fixtures.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace ctmsm;

namespace {

// Homogeneous toy: q12 = q21 = 0.05, death 0.01, p = (0.4, 0.2), occasions at 0, 10, 20.
struct Toy {
  ModelSpec spec = ModelSpec::homogeneous(2);
  ParamVector params;
  OccasionGrid grid{{0.0, 10.0, 20.0}, {{1, 1}, {1, 1}, {1, 1}}};

  Toy() {
    params = working_from_natural(spec, {{"q12.intercept", std::log(0.05)},
                                         {"q21.intercept", std::log(0.05)},
                                         {"death.intercept", std::log(0.01)},
                                         {"p1", 0.4},
                                         {"p2", 0.2}});
  }

  EncounterHistory history(std::vector<int> obs) const {
    EncounterHistory h;
    h.id = "toy";
    h.first_capture = first_capture_of(obs);
    h.observations = std::move(obs);
    return h;
  }
};

EncounterData dataset_of(const OccasionGrid& grid, std::vector<EncounterHistory> hs) {
  EncounterData d;
  d.grid = grid;
  d.alive_states = grid.areas();
  d.histories = std::move(hs);
  return d;
}

}  // namespace

TEST_CASE("toy history: forward, brute force and an external reference agree") {
  const Toy toy;
  const auto h = toy.history({1, 0, 2});
  const double fwd = individual_loglik_forward(toy.spec, toy.params, toy.grid, h);
  const double brute = individual_loglik_bruteforce(toy.spec, toy.params, toy.grid, h);
  // reference value from scipy.linalg.expm
  CHECK(fwd == doctest::Approx(-3.004673494801637).epsilon(1e-12));
  CHECK(std::abs(fwd - brute) <= 1e-12 * std::abs(brute));
}

TEST_CASE("fully observed history follows the single compatible path") {
  const Toy toy;
  const auto h = toy.history({1, 1, 2});
  const double fwd = individual_loglik_forward(toy.spec, toy.params, toy.grid, h);
  const IntensityModel model(toy.spec, toy.params);
  const Mat g = matrix_exponential(model.at(0.0, 0), 10.0).entries();
  const double by_hand = std::log(g(0, 0)) + std::log(0.4) + std::log(g(0, 1)) + std::log(0.2);
  CHECK(fwd == doctest::Approx(by_hand).epsilon(1e-13));
  CHECK(fwd == doctest::Approx(-4.257436463297005).epsilon(1e-12));
  CHECK(individual_loglik_bruteforce(toy.spec, toy.params, toy.grid, h) == doctest::Approx(fwd).epsilon(1e-13));
}

TEST_CASE("first capture at the last occasion contributes zero") {
  const Toy toy;
  const auto h = toy.history({0, 0, 2});
  CHECK(individual_loglik_forward(toy.spec, toy.params, toy.grid, h) == 0.0);
  CHECK(individual_loglik_bruteforce(toy.spec, toy.params, toy.grid, h) == 0.0);
}

TEST_CASE("impossible histories give -inf") {
  Toy toy;
  toy.params.values[toy.params.index("p2")] = -800.0;  // p2 == 0
  const auto h = toy.history({1, 0, 2});
  CHECK(individual_loglik_forward(toy.spec, toy.params, toy.grid, h) == -INFINITY);
  CHECK(individual_loglik_bruteforce(toy.spec, toy.params, toy.grid, h) == -INFINITY);
}

TEST_CASE("misaligned histories are rejected") {
  const Toy toy;
  auto h = toy.history({1, 0, 2});
  h.observations.push_back(0);
  CHECK_THROWS_AS(individual_loglik_forward(toy.spec, toy.params, toy.grid, h), InvalidInput);
}

TEST_CASE("brute force refuses large enumerations") {
  std::mt19937_64 rng(1);
  const auto grid = gen::random_grid(rng, 2, 20);
  EncounterHistory h;
  h.id = "long";
  h.observations.assign(20, 0);
  h.observations[0] = 1;
  const ModelSpec spec = ModelSpec::seasonal(2);
  const auto params = default_initial(spec);
  CHECK_THROWS_WITH_AS(individual_loglik_bruteforce(spec, params, grid, h), doctest::Contains("12"),
                       EnumerationLimit);
}

TEST_CASE("forward equals brute force on random instances") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 150; ++trial) {
    const int m = 1 + trial % 3;
    const auto in = gen::random_instance(rng, m, m == 3 ? 8 : 12);
    const double fwd = individual_loglik_forward(in.spec, in.params, in.grid, in.history);
    const double brute = individual_loglik_bruteforce(in.spec, in.params, in.grid, in.history);
    REQUIRE(std::isfinite(fwd));
    CHECK(std::abs(fwd - brute) <= 1e-10 * std::max(1.0, std::abs(brute)));
  }
}

TEST_CASE("single-state model reduces to the CJS likelihood") {
  // 4 occasions, history seen-unseen-seen-unseen.
  ModelSpec spec = ModelSpec::homogeneous(1);
  const double mu = 0.002;
  const double p = 0.35;
  const auto params = working_from_natural(spec, {{"death.intercept", std::log(mu)}, {"p1", p}});
  const OccasionGrid grid{{0.0, 40.0, 65.0, 130.0}, {{1}, {1}, {1}, {1}}};
  EncounterHistory h;
  h.id = "cjs";
  h.observations = {1, 0, 1, 0};
  const double expected = oracle::cjs_loglik(grid, h.observations, 0, mu, p);
  // by hand: phi1 (1-p) phi2 p [(1 - phi3) + phi3 (1-p)]
  const double phi1 = std::exp(-mu * 40), phi2 = std::exp(-mu * 25), phi3 = std::exp(-mu * 65);
  CHECK(expected == doctest::Approx(std::log(phi1 * (1 - p) * phi2 * p * ((1 - phi3) + phi3 * (1 - p)))));
  CHECK(individual_loglik_forward(spec, params, grid, h) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(individual_loglik_bruteforce(spec, params, grid, h) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("occasions without effort carry no information") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    const auto in = gen::random_instance(rng, 2, 12);
    // insert an empty occasion halfway between two existing occasions
    if (in.grid.occasions() < 2) continue;
    const int u = 1 + static_cast<int>(rng() % (in.grid.occasions() - 1));
    OccasionGrid grid = in.grid;
    EncounterHistory h = in.history;
    grid.times.insert(grid.times.begin() + u, 0.5 * (grid.times[u - 1] + grid.times[u]));
    grid.effort.insert(grid.effort.begin() + u, std::vector<int>(2, 0));
    h.observations.insert(h.observations.begin() + u, 0);
    if (u <= h.first_capture) ++h.first_capture;
    ModelSpec spec = in.spec;
    spec.study_span = in.grid.span();
    const double before = individual_loglik_forward(spec, in.params, in.grid, in.history);
    const double after = individual_loglik_forward(spec, in.params, grid, h);
    CHECK(after == doctest::Approx(before).epsilon(1e-11));
  }
}

TEST_CASE("likelihood of an always-seen history increases with detection") {
  const Toy toy;
  const auto h = toy.history({1, 1, 1});
  double previous = -INFINITY;
  for (double p1 : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    ParamVector params = toy.params;
    params.values[params.index("p1")] = logit(p1);
    const double ll = individual_loglik_forward(toy.spec, params, toy.grid, h);
    CHECK(ll > previous);
    previous = ll;
  }
}

TEST_CASE("total log-likelihood structure") {
  const Toy toy;
  const auto a = toy.history({1, 0, 2});
  const auto b = toy.history({2, 2, 0});
  const auto c = toy.history({0, 1, 1});
  const double single = individual_loglik_forward(toy.spec, toy.params, toy.grid, a);
  CHECK(total_loglik(toy.spec, toy.params, dataset_of(toy.grid, {a})) == single);
  CHECK(total_loglik(toy.spec, toy.params, dataset_of(toy.grid, {a, a})) == 2.0 * single);
  const double abc = total_loglik(toy.spec, toy.params, dataset_of(toy.grid, {a, b, c}));
  const double cab = total_loglik(toy.spec, toy.params, dataset_of(toy.grid, {c, a, b}));
  CHECK(abc == doctest::Approx(cab).epsilon(1e-15));
  CHECK(total_loglik(toy.spec, toy.params, dataset_of(toy.grid, {a, b, c}), 3) == abc);
}

TEST_CASE("per-individual errors carry the individual id") {
  Toy toy;
  toy.spec.covariate = "sex";
  const auto params = default_initial(toy.spec);
  auto h = toy.history({1, 0, 2});
  h.id = "nosex";
  CHECK_THROWS_WITH(total_loglik(toy.spec, params, dataset_of(toy.grid, {h})), doctest::Contains("nosex"));
}
