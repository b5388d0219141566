#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "gdpen/loss.hpp"
#include "gdpen/penalty.hpp"
#include "gdpen/solver.hpp"

namespace gdpen {

enum class ErrorNorm { Linf, L2, GroupLinf };
enum class Verdict { Pass, Fail, Indeterminate };

const char* to_string(ErrorNorm norm);
const char* to_string(Verdict v);

/// Error norm and its dual. Group norms treat coordinates outside every
/// group as singleton groups.
double error_norm(ErrorNorm norm, const Vector& x, const std::vector<IndexSet>& groups = {});
double dual_error_norm(ErrorNorm norm, const Vector& x, const std::vector<IndexSet>& groups = {});
/// Default: group-linf for group lasso, linf otherwise.
ErrorNorm default_error_norm(const Penalty& rho);
std::vector<IndexSet> penalty_groups(const Penalty& rho);

/// V(z) = inf_u gamma_I(u) + 1_{S^perp}(z - u), with the minimizing split.
struct VResult {
  ExtReal value;
  Interval bracket;
  bool exact = true;
  bool converged = true;
  Vector u_I;       // minimizing u (meaningful when value is finite)
  Vector u_S_perp;  // z - u_I
};

VResult V_value(const Penalty& rho, const Vector& z);
/// Generic bisection path, bypassing closed forms (used to cross-check them).
VResult V_value_generic(const Penalty& rho, const Vector& z);

/// K = P_{M^perp}(Q P_M (P_M Q P_M)^+ P_M - I), so the irrepresentable map is z -> K z.
struct IrrepMap {
  Matrix K;
  RestrictedInverse inverse;
};
IrrepMap irrep_map(const Penalty& rho, const Matrix& q);

struct IrrepResult {
  Interval sup;  // [lb, ub] for sup_{z in dh_A(M)} V(K z)
  double tau = 0.0;
  Verdict verdict = Verdict::Indeterminate;
  std::string method;  // lasso-closed-form | atoms | ascent
  bool exact = false;
};

IrrepResult irrep_check(const Penalty& rho, const Matrix& q, std::uint64_t seed = 0);

struct Compatibility {
  double kappa_err = 0.0;
  double kappa_err_star = 0.0;
  double kappa_A = 0.0;
  double tau_bar = 0.0;             // sup over the full error-norm ball
  double tau_bar_restricted = kInf; // sup over the error-norm ball intersected with M
  bool exact = true;                // false when any constant came from ascent
  double safety_factor = 1.0;       // applied to ascent-based constants
};

Compatibility compatibility_constants(const Penalty& rho, ErrorNorm norm, const Matrix& q,
                                      std::uint64_t seed = 0);

struct Smoothness {
  double m_C = 0.0;
  double L_C = 0.0;
  bool estimated = false;  // sampled over C for non-quadratic losses
};

/// m_C and L_C over the l2 ball of `radius` around theta_star intersected with M.
Smoothness smoothness_constants(const Loss& loss, const Penalty& rho, const Vector& theta_star,
                                double radius, std::uint64_t seed = 0);

struct LambdaWindow {
  double lo = 0.0;
  double hi = kInf;
  bool empty = false;
  bool degenerate = false;  // tau_bar = 0 with a nonzero gradient
  bool contains(double lambda) const { return !empty && lo < lambda && lambda < hi; }
};

struct CertificateReport {
  Interval irrep_sup;
  double tau = 0.0;
  double tau_bar = 0.0;             // value used in the window (after enlargement)
  double tau_bar_raw = 0.0;
  double tau_bar_restricted = kInf;
  double kappa_err = 0.0;
  double kappa_err_star = 0.0;
  double kappa_A = 0.0;
  double m_C = 0.0;
  double L_C = 0.0;
  bool constants_estimated = false;
  double grad_norm = 0.0;
  bool has_gradient = false;
  LambdaWindow lambda_window;
  Verdict irrepresentable = Verdict::Indeterminate;
  Verdict rss = Verdict::Fail;
  ErrorNorm error_norm = ErrorNorm::Linf;
  std::string irrep_method;
  std::string face_sampling = "all of A (0 lies in M, so dh_A(0) = A covers every face)";

  double error_bound_coefficient() const;  // 2 (kappa_A + (tau/2 tau_bar) kappa_err*) / m_C
  Verdict overall() const;
};

LambdaWindow lambda_window(const CertificateReport& report, double grad_norm);
double theorem_error_bound(const CertificateReport& report, double lambda);

struct CertifyOptions {
  std::optional<ErrorNorm> error_norm;
  std::optional<Vector> theta_star;
  double radius = 1.0;  // C = ball around theta_star (non-quadratic losses)
  std::uint64_t seed = 0;
};

/// Full certificate: irrepresentability, compatibility constants, restricted
/// strong smoothness at theta_star and the lambda window when the gradient
/// at theta_star is available.
CertificateReport certify(const Loss& loss, const Penalty& rho, const CertifyOptions& opts);
/// Quadratic-form variant used by the CLI when only Q is given.
CertificateReport certify_quadratic(const Matrix& q, const Penalty& rho,
                                    const CertifyOptions& opts);

struct WitnessReport {
  Vector theta_hat;
  Vector u_A;
  Vector u_I;
  Vector u_S_perp;
  double gauge_I_of_u_I = kInf;
  double stationarity_residual = kInf;
  bool certified_unique = false;
  bool indeterminate = false;
  double lambda = 0.0;
};

/// Primal-dual witness from a restricted solution theta_hat in M.
WitnessReport dual_certificate(const Loss& loss, const Penalty& rho, double lambda,
                               const Vector& theta_hat);

struct ConverseOptions {
  int trials = 400;
  int n = 200;
  double sigma = 0.5;
  int grid_points = 20;
  double lambda_min = 1e-3;
  double lambda_max = 2.0;
  std::uint64_t seed = 0;
  bool parallel = true;
};

struct ConverseReport {
  bool applicable = false;
  std::string reason;
  double violation = 0.0;
  std::vector<double> lambdas;
  std::vector<int> successes;  // per lambda
  int trials = 0;
  double max_success = 0.0;
  double best_lambda = 0.0;
  Interval wilson;  // 95% interval at the best lambda
};

/// Wilson score interval for k successes out of n at z = 1.96.
Interval wilson_interval(int k, int n, double z = 1.959963984540054);

/// Converse check for a lasso penalty built on the support of theta_star with
/// population covariance q: inf over the (singleton) subdifferential of V(K z);
/// when it is >= 1, simulates trials and records the best success rate over a
/// log-spaced lambda grid.
ConverseReport converse_check(const Penalty& rho, const Matrix& q, const Vector& theta_star,
                              const ConverseOptions& opts);

}  // namespace gdpen
