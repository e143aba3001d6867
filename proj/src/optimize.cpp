#include "ctmsm/optimize.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "ctmsm/parallel.hpp"

namespace ctmsm {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 60;
constexpr int kStallSteps = 20;
constexpr int kRestartSteps = 3;
constexpr int kMaxRestarts = 3;

struct Counted {
  const Objective& f;
  std::atomic<int> calls{0};

  double operator()(const Eigen::VectorXd& x) {
    ++calls;
    const double v = f(x);
    return std::isfinite(v) ? v : kInf;
  }
};

}  // namespace

Eigen::VectorXd numerical_gradient(const Objective& f, const Eigen::VectorXd& x, double step, int threads) {
  const auto n = x.size();
  Eigen::VectorXd g(n);
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
    const double h = step * (1.0 + std::abs(x[i]));
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  });
  return g;
}

HessianEstimate numerical_hessian(const Objective& f, const Eigen::VectorXd& x, double hessian_step,
                                  double gradient_step, int threads) {
  const auto n = x.size();
  Eigen::MatrixXd h(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double step = hessian_step * (1.0 + std::abs(x[i]));
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += step;
    xm[i] -= step;
    h.row(i) = ((numerical_gradient(f, xp, gradient_step, threads) - numerical_gradient(f, xm, gradient_step, threads)) /
                (2.0 * step))
                   .transpose();
  }
  HessianEstimate est;
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  est.asymmetry = (h - h.transpose()).cwiseAbs().maxCoeff() / scale;
  est.matrix = 0.5 * (h + h.transpose());
  return est;
}

OptimResult minimize_bfgs(const Objective& objective, const Eigen::VectorXd& x0, const OptimOptions& options) {
  Counted f{objective};
  auto grad = [&](const Eigen::VectorXd& x) {
    return numerical_gradient([&](const Eigen::VectorXd& y) { return f(y); }, x, options.gradient_step,
                              options.threads);
  };
  const auto n = x0.size();
  OptimResult r;
  r.x = x0;
  r.value = f(x0);
  if (!std::isfinite(r.value)) {
    r.message = "objective is not finite at the starting point";
    r.evaluations = f.calls;
    return r;
  }
  Eigen::VectorXd g = grad(r.x);
  Eigen::MatrixXd inv_h = Eigen::MatrixXd::Identity(n, n);
  bool identity = true;
  int small_steps = 0;
  int restarts = 0;

  for (r.iterations = 0; r.iterations < options.max_iterations; ++r.iterations) {
    if (!g.allFinite()) {
      r.message = "non-finite gradient";
      break;
    }
    if (g.cwiseAbs().maxCoeff() < options.gradient_tolerance) {
      r.converged = true;
      r.message = "gradient tolerance reached";
      break;
    }
    Eigen::VectorXd d = -inv_h * g;
    if (g.dot(d) >= 0.0) {
      inv_h.setIdentity();
      identity = true;
      d = -g;
    }
    const double longest = d.cwiseAbs().maxCoeff();
    if (longest > options.max_step) d *= options.max_step / longest;

    const double slope = g.dot(d);
    double alpha = 1.0;
    double f_new = kInf;
    Eigen::VectorXd x_new;
    bool accepted = false;
    for (int k = 0; k < kMaxBacktracks; ++k, alpha *= 0.5) {
      x_new = r.x + alpha * d;
      f_new = f(x_new);
      if (f_new <= r.value + kArmijo * alpha * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!identity) {
        inv_h.setIdentity();
        identity = true;
        continue;
      }
      r.converged = g.cwiseAbs().maxCoeff() < options.gradient_tolerance;
      r.message = "line search stalled";
      break;
    }

    const Eigen::VectorXd g_new = grad(x_new);
    const Eigen::VectorXd s = x_new - r.x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (identity) inv_h *= sy / y.dot(y);
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd left = Eigen::MatrixXd::Identity(n, n) - rho * s * y.transpose();
      inv_h = left * inv_h * left.transpose() + rho * s * s.transpose();
      identity = false;
    }
    const double improvement = (r.value - f_new) / std::max(1.0, std::abs(f_new));
    r.x = x_new;
    r.value = f_new;
    g = g_new;
    small_steps = improvement < options.relative_tolerance ? small_steps + 1 : 0;
    // stagnating above the gradient tolerance: rebuild the curvature from a finite-difference Hessian
    if (small_steps == kRestartSteps && restarts < kMaxRestarts &&
        g.cwiseAbs().maxCoeff() >= options.gradient_tolerance) {
      ++restarts;
      const HessianEstimate h = numerical_hessian([&](const Eigen::VectorXd& v) { return f(v); }, r.x,
                                                  options.hessian_step, options.gradient_step, options.threads);
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h.matrix);
      if (h.matrix.allFinite() && eig.eigenvalues().minCoeff() > 0.0) {
        inv_h = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
        identity = false;
        small_steps = 0;
      }
    }
    if (small_steps >= kStallSteps) {
      r.converged = g.cwiseAbs().maxCoeff() < options.gradient_tolerance;
      r.message = "relative tolerance reached";
      ++r.iterations;
      break;
    }
  }
  if (r.message.empty()) r.message = "iteration limit reached";
  r.gradient_norm = g.cwiseAbs().maxCoeff();
  r.evaluations = f.calls;
  return r;
}

OptimResult minimize_nelder_mead(const Objective& objective, const Eigen::VectorXd& x0, const OptimOptions& options) {
  Counted f{objective};
  const auto n = x0.size();
  std::vector<Eigen::VectorXd> simplex(n + 1, x0);
  std::vector<double> values(n + 1);
  for (Eigen::Index i = 0; i < n; ++i) simplex[i + 1][i] += 0.5;
  for (Eigen::Index i = 0; i <= n; ++i) values[i] = f(simplex[i]);

  OptimResult r;
  std::vector<int> order(n + 1);
  const int max_iter = options.max_iterations * static_cast<int>(std::max<Eigen::Index>(n, 1)) * 10;
  for (r.iterations = 0; r.iterations < max_iter; ++r.iterations) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return values[a] < values[b]; });
    const int best = order.front(), worst = order.back(), second = order[n - 1];
    const double spread = values[worst] - values[best];
    if (std::isfinite(values[worst]) &&
        spread <= options.relative_tolerance * std::max(1.0, std::abs(values[best]))) {
      double diameter = 0.0;
      for (const auto& v : simplex) diameter = std::max(diameter, (v - simplex[best]).cwiseAbs().maxCoeff());
      if (diameter < 1e-6) {
        r.converged = true;
        r.message = "simplex collapsed";
        break;
      }
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i : order) {
      if (i != worst) centroid += simplex[i];
    }
    centroid /= static_cast<double>(n);
    const Eigen::VectorXd reflected = centroid + (centroid - simplex[worst]);
    const double f_reflected = f(reflected);
    if (f_reflected < values[best]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double f_expanded = f(expanded);
      if (f_expanded < f_reflected) {
        simplex[worst] = expanded;
        values[worst] = f_expanded;
      } else {
        simplex[worst] = reflected;
        values[worst] = f_reflected;
      }
      continue;
    }
    if (f_reflected < values[second]) {
      simplex[worst] = reflected;
      values[worst] = f_reflected;
      continue;
    }
    const bool outside = f_reflected < values[worst];
    const Eigen::VectorXd contracted =
        outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                : Eigen::VectorXd(centroid + 0.5 * (simplex[worst] - centroid));
    const double f_contracted = f(contracted);
    if (f_contracted < std::min(f_reflected, values[worst])) {
      simplex[worst] = contracted;
      values[worst] = f_contracted;
      continue;
    }
    for (int i : order) {
      if (i == best) continue;
      simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
      values[i] = f(simplex[i]);
    }
  }
  const int best = static_cast<int>(std::min_element(values.begin(), values.end()) - values.begin());
  r.x = simplex[best];
  r.value = values[best];
  if (r.message.empty()) r.message = "iteration limit reached";
  if (std::isfinite(r.value)) {
    r.gradient_norm = numerical_gradient([&](const Eigen::VectorXd& y) { return f(y); }, r.x, options.gradient_step,
                                         options.threads)
                          .cwiseAbs()
                          .maxCoeff();
  }
  r.evaluations = f.calls;
  return r;
}

}  // namespace ctmsm
