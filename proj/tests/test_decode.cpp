#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ctmsm/decode.hpp"
#include "ctmsm/error.hpp"
#include "generators.hpp"

using namespace ctmsm;

namespace {

// Joint log-probability of a one-based state path starting at first capture.
double path_logprob(const gen::Instance& in, const std::vector<int>& path) {
  const LikelihoodContext ctx(in.spec, in.params, in.grid);
  const auto& sched = ctx.schedule_for(in.history);
  const int g = in.history.first_capture;
  double lp = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const int u = g + static_cast<int>(i);
    const RowVec pr = observation_probabilities(ctx.model().detection(), in.grid.effort[u], in.history.observations[u]);
    lp += std::log(sched.into(u)(path[i - 1] - 1, path[i] - 1) * pr[path[i] - 1]);
  }
  return lp;
}

// Random compatible path: each step picks uniformly among states of positive weight, restarting on dead ends.
std::vector<int> random_compatible_path(std::mt19937_64& rng, const gen::Instance& in) {
  const LikelihoodContext ctx(in.spec, in.params, in.grid);
  const auto& sched = ctx.schedule_for(in.history);
  const int g = in.history.first_capture;
  std::vector<int> path{in.history.observations[g]};
  for (int u = g + 1; u < in.grid.occasions(); ++u) {
    const RowVec pr = observation_probabilities(ctx.model().detection(), in.grid.effort[u], in.history.observations[u]);
    std::vector<int> options;
    for (int s = 0; s <= in.spec.alive_states; ++s) {
      if (sched.into(u)(path.back() - 1, s) * pr[s] > 0.0) options.push_back(s + 1);
    }
    if (options.empty()) {
      path.resize(1);
      u = g;
      continue;
    }
    path.push_back(options[rng() % options.size()]);
  }
  return path;
}

gen::Instance fully_observed() {
  gen::Instance in;
  in.spec = ModelSpec::seasonal(2, 10.0);
  in.params = default_initial(in.spec);
  in.params.values[in.params.index("q12.intercept")] = std::log(0.05);
  in.params.values[in.params.index("q21.intercept")] = std::log(0.03);
  in.grid.times = {0, 5, 12, 20, 33, 41};
  in.grid.effort.assign(6, {1, 1});
  in.history.id = "a";
  in.history.observations = {0, 1, 1, 2, 2, 1};
  in.history.first_capture = 1;
  return in;
}

}  // namespace

TEST_CASE("fully observed history decodes to the observations") {
  const auto in = fully_observed();
  const Decoder dec(in.spec, in.params, in.grid);
  const DecodedPath d = dec.decode(in.history);
  CHECK(d.first_capture == 1);
  CHECK(d.states == std::vector<int>{1, 1, 2, 2, 1});
  REQUIRE(d.posterior.rows() == 5);
  REQUIRE(d.posterior.cols() == 3);
  for (int i = 0; i < 5; ++i) {
    for (int k = 0; k < 3; ++k) CHECK(d.posterior(i, k) == doctest::Approx(k + 1 == d.states[i] ? 1.0 : 0.0));
  }
}

TEST_CASE("decoding matches enumeration on random instances") {
  std::mt19937_64 rng(404);
  for (int rep = 0; rep < 120; ++rep) {
    const int alive = 1 + rep % 3;
    const auto in = gen::random_instance(rng, alive, 10, 14);
    const Decoder dec(in.spec, in.params, in.grid);
    const DecodedPath fast = dec.decode(in.history);
    const DecodedPath slow = decode_by_enumeration(in.spec, in.params, in.grid, in.history);
    CHECK(fast.states == slow.states);
    REQUIRE(fast.posterior.rows() == slow.posterior.rows());
    CHECK((fast.posterior - slow.posterior).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("viterbi path beats random compatible paths") {
  std::mt19937_64 rng(405);
  for (int rep = 0; rep < 10; ++rep) {
    const auto in = gen::random_instance(rng, 2 + rep % 2, 10, 14);
    const auto best = viterbi(in.spec, in.params, in.grid, in.history);
    const double lp = path_logprob(in, best);
    for (int k = 0; k < 1000; ++k) {
      const auto other = random_compatible_path(rng, in);
      CHECK(lp >= path_logprob(in, other) - 1e-12);
    }
  }
}

TEST_CASE("posterior structure") {
  std::mt19937_64 rng(406);
  for (int rep = 0; rep < 100; ++rep) {
    const auto in = gen::random_instance(rng, 1 + rep % 3, 10, 16);
    const int alive = in.spec.alive_states;
    const Eigen::MatrixXd post = state_probabilities(in.spec, in.params, in.grid, in.history);
    const auto states = viterbi(in.spec, in.params, in.grid, in.history);
    const int g = in.history.first_capture;
    int last_seen = 0;
    for (int i = 0; i < post.rows(); ++i) {
      CHECK(std::abs(post.row(i).sum() - 1.0) < 1e-10);
      CHECK(post.row(i).minCoeff() >= 0.0);
      const int x = in.history.observations[g + i];
      if (x > 0) {
        last_seen = i;
        CHECK(post(i, x - 1) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(states[i] == x);
      }
    }
    CHECK(states[0] == in.history.observations[g]);
    for (int i = last_seen + 1; i < post.rows(); ++i) CHECK(post(i, alive) >= post(i - 1, alive) - 1e-12);
    for (std::size_t i = 1; i < states.size(); ++i) {
      if (states[i - 1] == alive + 1) CHECK(states[i] == alive + 1);
    }
  }
}

TEST_CASE("long silence under high mortality decodes as dead") {
  gen::Instance in;
  in.spec = ModelSpec::seasonal(2, 30.0);
  in.params = default_initial(in.spec);
  in.params.values[in.params.index("death.intercept")] = std::log(1.0 / 100.0);
  in.params.values[in.params.index("p1")] = logit(0.6);
  in.params.values[in.params.index("p2")] = logit(0.6);
  for (int u = 0; u < 40; ++u) {
    in.grid.times.push_back(20.0 * u);
    in.grid.effort.push_back({1, 1});
  }
  in.history.id = "old";
  in.history.observations.assign(40, 0);
  in.history.observations[0] = 1;
  in.history.observations[3] = 2;
  in.history.first_capture = 0;
  const auto states = viterbi(in.spec, in.params, in.grid, in.history);
  CHECK(states[3] == 2);
  CHECK(states.back() == 3);
  const Eigen::MatrixXd post = state_probabilities(in.spec, in.params, in.grid, in.history);
  CHECK(post(39, 2) > 0.99);
}

TEST_CASE("decoding long histories does not underflow") {
  gen::Instance in;
  in.spec = ModelSpec::seasonal(2, 30.0);
  in.params = default_initial(in.spec);
  in.params.values[in.params.index("death.intercept")] = std::log(1e-6);
  for (int u = 0; u < 3000; ++u) {
    in.grid.times.push_back(3.0 * u);
    in.grid.effort.push_back({1, 1});
  }
  in.history.id = "long";
  in.history.observations.assign(3000, 0);
  for (int u = 0; u < 3000; u += 7) in.history.observations[u] = 1 + (u / 700) % 2;
  in.history.first_capture = 0;
  const Decoder dec(in.spec, in.params, in.grid);
  const DecodedPath d = dec.decode(in.history);
  CHECK(d.posterior.allFinite());
  CHECK(d.states.size() == 3000);
  CHECK(d.states[700] == 2);
}

TEST_CASE("decoded CSV layout") {
  const auto in = fully_observed();
  EncounterData data;
  data.grid = in.grid;
  data.alive_states = 2;
  data.histories = {in.history};
  const auto paths = decode_all(in.spec, in.params, data);
  std::ostringstream os;
  write_decoded(os, data, paths, ';');
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "id;time;viterbi_state;p_state_1;p_state_2;p_state_3");
  std::getline(is, line);
  CHECK(line == "a;5;1;1;0;0");
  int rows = 1;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 5);
  CHECK_THROWS_AS(write_decoded(os, data, {}), InvalidInput);
}

TEST_CASE("decoding input errors") {
  auto in = fully_observed();
  in.history.observations.pop_back();
  CHECK_THROWS_AS(viterbi(in.spec, in.params, in.grid, in.history), InvalidInput);
  CHECK_THROWS_AS(state_probabilities(in.spec, in.params, in.grid, in.history), InvalidInput);

  gen::Instance big;
  big.spec = ModelSpec::seasonal(1, 10.0);
  big.params = default_initial(big.spec);
  for (int u = 0; u < 20; ++u) {
    big.grid.times.push_back(u);
    big.grid.effort.push_back({1});
  }
  big.history.id = "b";
  big.history.observations.assign(20, 0);
  big.history.observations[0] = 1;
  CHECK_THROWS_AS(decode_by_enumeration(big.spec, big.params, big.grid, big.history), EnumerationLimit);
  CHECK_NOTHROW(decode_by_enumeration(big.spec, big.params, big.grid, big.history, 19));
}
