#pragma once

#include <optional>
#include <string>

#include "gdpen/loss.hpp"
#include "gdpen/penalty.hpp"

namespace gdpen {

struct SolverOptions {
  double tol = 1e-8;          // composite gradient map (prox-gradient) or residuals (ADMM)
  int max_iter = 50000;
  double eps_supp = 1e-6;
  std::optional<Vector> init;
  bool record_objective = false;
};

struct EstimateResult {
  Vector theta_hat;
  double objective = 0.0;
  int iterations = 0;
  double stationarity_residual = 0.0;
  bool converged = false;
  IndexSet support;  // coordinates, or group ids for group penalties
  std::string solver;
  std::vector<double> objective_trace;
};

/// argmin l(theta) + lambda rho(theta). Separable penalties use monotone
/// accelerated proximal gradient (plain proximal gradient with domain
/// backtracking for losses with a restricted domain); other penalties use
/// ADMM on the lifted form.
EstimateResult solve(const Loss& loss, const Penalty& rho, double lambda,
                     const SolverOptions& opts = {});

/// argmin l(theta) + lambda h_A(theta) over theta in M, solved in the
/// coordinates of a basis of M.
EstimateResult solve_restricted(const Loss& loss, const Penalty& rho, double lambda,
                                const SolverOptions& opts = {});

/// Units with magnitude above eps: coordinates |theta_i|, or groups
/// ||theta_g||_2 for group penalties.
IndexSet support_of(const Penalty& rho, const Vector& theta, double eps);

/// dist(-grad, lambda * d(h_A + h_I)(theta)) for separable penalties.
double kkt_residual(const SeparableStructure& sep, const Vector& theta, const Vector& grad,
                    double lambda);

}  // namespace gdpen
