#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace ctmsm {

/// Function to minimize. May return +inf for infeasible points; must be thread-safe
/// when `threads > 1` is requested.
using Objective = std::function<double(const Eigen::VectorXd&)>;

struct OptimOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-5;   // max-norm
  double relative_tolerance = 1e-9;   // relative decrease of the objective
  double gradient_step = 1e-6;        // central difference step, scaled by (1 + |x_i|)
  double hessian_step = 1e-4;         // for curvature restarts, scaled by (1 + |x_i|)
  double max_step = 5.0;              // largest coordinate move per line search
  int threads = 1;
};

struct OptimResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string message;
};

/// Central-difference gradient with step `step * (1 + |x_i|)`.
Eigen::VectorXd numerical_gradient(const Objective& f, const Eigen::VectorXd& x, double step, int threads = 1);

struct HessianEstimate {
  Eigen::MatrixXd matrix;   // symmetrized
  double asymmetry = 0.0;   // max |H_ij - H_ji| / max(1, max |H|) before symmetrizing
};

/// Central differences of the numerical gradient with step `hessian_step * (1 + |x_i|)`.
HessianEstimate numerical_hessian(const Objective& f, const Eigen::VectorXd& x, double hessian_step = 1e-4,
                                  double gradient_step = 1e-6, int threads = 1);

/// Quasi-Newton (BFGS inverse update) with backtracking Armijo line search.
OptimResult minimize_bfgs(const Objective& f, const Eigen::VectorXd& x0, const OptimOptions& options = {});

/// Derivative-free simplex search.
OptimResult minimize_nelder_mead(const Objective& f, const Eigen::VectorXd& x0, const OptimOptions& options = {});

}  // namespace ctmsm
