#include "ctmsm/decode.hpp"

#include <cmath>
#include <limits>

#include "ctmsm/error.hpp"
#include "ctmsm/parallel.hpp"

namespace ctmsm {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log(double v) { return v > 0.0 ? std::log(v) : kNegInf; }

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

Decoder::Decoder(const ModelSpec& spec, const ParamVector& params, const OccasionGrid& grid)
    : spec_(&spec), ctx_(spec, params, grid) {}

std::vector<int> Decoder::viterbi(const EncounterHistory& h) const {
  const int alive = spec_->alive_states;
  const int states = alive + 1;
  const OccasionGrid& grid = ctx_.grid();
  check_history(grid, h, alive);
  const TransitionSchedule& sched = ctx_.schedule_for(h);
  const Eigen::VectorXd& p = ctx_.model().detection();
  const int g = h.first_capture;
  const int steps = grid.occasions() - g;

  std::vector<std::vector<int>> back(steps, std::vector<int>(states, 0));
  std::vector<double> delta(states, kNegInf), next(states);
  delta[h.observations[g] - 1] = 0.0;
  for (int u = g + 1; u < grid.occasions(); ++u) {
    const RowVec pr = observation_probabilities(p, grid.effort[u], h.observations[u]);
    const TransitionMatrix& gamma = sched.into(u);
    for (int s = 0; s < states; ++s) {
      double best = kNegInf;
      int arg = 0;
      for (int k = 0; k < states; ++k) {
        const double v = delta[k] + safe_log(gamma(k, s));
        if (v > best) {
          best = v;
          arg = k;
        }
      }
      next[s] = best + safe_log(pr[s]);
      back[u - g][s] = arg;
    }
    delta.swap(next);
  }

  int s = 0;
  for (int k = 1; k < states; ++k) {
    if (delta[k] > delta[s]) s = k;
  }
  if (delta[s] == kNegInf) throw InvalidInput("individual '" + h.id + "': history has probability zero");
  std::vector<int> path(steps);
  for (int i = steps - 1; i >= 0; --i) {
    path[i] = s + 1;
    s = back[i][s];
  }
  return path;
}

Eigen::MatrixXd Decoder::state_probabilities(const EncounterHistory& h) const {
  const int alive = spec_->alive_states;
  const int states = alive + 1;
  const OccasionGrid& grid = ctx_.grid();
  check_history(grid, h, alive);
  const TransitionSchedule& sched = ctx_.schedule_for(h);
  const Eigen::VectorXd& p = ctx_.model().detection();
  const int g = h.first_capture;
  const int steps = grid.occasions() - g;

  Eigen::MatrixXd alpha = Eigen::MatrixXd::Zero(steps, states);
  std::vector<RowVec> pr(steps);
  std::vector<double> scale(steps, 1.0);
  alpha(0, h.observations[g] - 1) = 1.0;
  for (int i = 1; i < steps; ++i) {
    const int u = g + i;
    pr[i] = observation_probabilities(p, grid.effort[u], h.observations[u]);
    RowVec a = (alpha.row(i - 1) * sched.into(u).entries()).cwiseProduct(pr[i]);
    scale[i] = a.sum();
    if (!(scale[i] > 0.0)) throw InvalidInput("individual '" + h.id + "': history has probability zero");
    alpha.row(i) = a / scale[i];
  }

  Eigen::MatrixXd post(steps, states);
  RowVec beta = RowVec::Ones(states);
  post.row(steps - 1) = alpha.row(steps - 1);
  for (int i = steps - 2; i >= 0; --i) {
    const RowVec weighted = beta.cwiseProduct(pr[i + 1]);
    RowVec b = (sched.into(g + i + 1).entries() * weighted.transpose()).transpose();
    beta = b / scale[i + 1];
    RowVec row = alpha.row(i).cwiseProduct(beta);
    post.row(i) = row / row.sum();
  }
  return post;
}

DecodedPath Decoder::decode(const EncounterHistory& h) const {
  DecodedPath d;
  d.first_capture = h.first_capture;
  d.states = viterbi(h);
  d.posterior = state_probabilities(h);
  return d;
}

std::vector<int> viterbi(const ModelSpec& spec, const ParamVector& params, const OccasionGrid& grid,
                         const EncounterHistory& history) {
  return Decoder(spec, params, grid).viterbi(history);
}

Eigen::MatrixXd state_probabilities(const ModelSpec& spec, const ParamVector& params, const OccasionGrid& grid,
                                    const EncounterHistory& history) {
  return Decoder(spec, params, grid).state_probabilities(history);
}

std::vector<DecodedPath> decode_all(const ModelSpec& spec, const ParamVector& params, const EncounterData& data,
                                    int threads) {
  const Decoder decoder(spec, params, data.grid);
  std::vector<DecodedPath> out(data.histories.size());
  parallel_for(data.histories.size(), threads, [&](std::size_t i) { out[i] = decoder.decode(data.histories[i]); });
  return out;
}

DecodedPath decode_by_enumeration(const ModelSpec& spec, const ParamVector& params, const OccasionGrid& grid,
                                  const EncounterHistory& history, int max_unknown) {
  const int alive = spec.alive_states;
  const int states = alive + 1;
  check_history(grid, history, alive);
  const int g = history.first_capture;
  int unknown = 0;
  for (int u = g + 1; u < grid.occasions(); ++u) unknown += history.observations[u] == 0;
  if (unknown > max_unknown) {
    throw EnumerationLimit("enumeration decoding: " + std::to_string(unknown) +
                           " unobserved occasions exceed the limit of " + std::to_string(max_unknown));
  }
  const LikelihoodContext ctx(spec, params, grid);
  const TransitionSchedule& sched = ctx.schedule_for(history);
  const Eigen::VectorXd& p = ctx.model().detection();
  const int steps = grid.occasions() - g;

  std::vector<int> path(steps);
  path[0] = history.observations[g] - 1;
  std::vector<int> best_path;
  double best = kNegInf, total = kNegInf;
  Eigen::MatrixXd marginal = Eigen::MatrixXd::Constant(steps, states, kNegInf);

  auto visit = [&](auto&& self, int i, double log_weight) -> void {
    if (i == steps) {
      total = log_add(total, log_weight);
      for (int j = 0; j < steps; ++j) marginal(j, path[j]) = log_add(marginal(j, path[j]), log_weight);
      if (log_weight > best) {
        best = log_weight;
        best_path = path;
      }
      return;
    }
    const int u = g + i;
    const int x = history.observations[u];
    const RowVec pr = observation_probabilities(p, grid.effort[u], x);
    for (int s = 0; s < states; ++s) {
      const double w = sched.into(u)(path[i - 1], s) * pr[s];
      if (w <= 0.0) continue;
      path[i] = s;
      self(self, i + 1, log_weight + std::log(w));
    }
  };
  visit(visit, 1, 0.0);
  if (best_path.empty()) throw InvalidInput("individual '" + history.id + "': history has probability zero");

  DecodedPath d;
  d.first_capture = g;
  for (int s : best_path) d.states.push_back(s + 1);
  d.posterior = (marginal.array() - total).exp().matrix();
  return d;
}

void write_decoded(std::ostream& out, const EncounterData& data, const std::vector<DecodedPath>& paths,
                   char delimiter) {
  if (paths.size() != data.histories.size()) throw InvalidInput("decoded paths do not match the histories");
  const char d = delimiter;
  out << "id" << d << "time" << d << "viterbi_state";
  for (int k = 1; k <= data.alive_states + 1; ++k) out << d << "p_state_" << k;
  out << '\n';
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const DecodedPath& path = paths[i];
    for (std::size_t j = 0; j < path.states.size(); ++j) {
      out << data.histories[i].id << d << format_real(data.grid.times[path.first_capture + j]) << d << path.states[j];
      for (Eigen::Index k = 0; k < path.posterior.cols(); ++k) out << d << format_real(path.posterior(j, k));
      out << '\n';
    }
  }
}

}  // namespace ctmsm
