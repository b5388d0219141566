#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gdpen/certification.hpp"
#include "gdpen/datasets.hpp"
#include "gdpen/parallel.hpp"

namespace gdpen {

enum class Family { Lasso, GeneralizedLasso, GroupGlasso };
enum class LambdaRule { Theory, Proportional };

const char* to_string(Family f);
const char* to_string(LambdaRule r);

struct PhaseConfig {
  Family family = Family::GroupGlasso;
  std::vector<int> sizes{16, 25, 36};  // p for lasso families, node count for group_glasso
  std::vector<int> n_grid{100, 200, 300, 400, 500, 600, 700, 800, 900, 1000};
  int trials = 100;
  double sigma = 0.5;
  double tau_target = 0.5;
  std::uint64_t master_seed = 0;
  LambdaRule lambda_rule = LambdaRule::Proportional;
  double lambda_const = 2.5;  // c in c * sqrt(max_g |g| log |G| / n)
  int sparsity = 4;           // nonzeros (lasso) or jumps (generalized lasso)
  double theta_min = 1.0;
  Graph graph = Graph::Chain;
  int block_size = 2;
  double delta = 1.0;
  double edge_weight = 0.2;
  double eps_supp = 1e-6;
  double tol = 1e-8;
  int max_iter = 50000;
  bool attach_certificates = false;

  void validate() const;
};

struct TrialRecord {
  std::uint64_t seed = 0;
  bool success = false;
  bool converged = false;
  double l2_error = 0.0;
  double lambda = 0.0;
  int iterations = 0;
  std::string error;
  // Certificate data (lasso, when requested).
  bool has_certificate = false;
  double irrep_ub = 0.0;
  double window_lo = 0.0;
  bool in_window = false;
};

struct PhaseCell {
  int size_index = 0;
  int n_index = 0;
  int size = 0;
  int n = 0;
  int trials = 0;
  int successes = 0;
  int nonconverged = 0;
  int certified = 0;  // trials with irrepresentability passing and lambda in the window
  double success_fraction = 0.0;
  double mean_l2_error = 0.0;
  double lambda = 0.0;
  double rescaled = 0.0;  // n / (max_g |g| log |G|)
  std::vector<TrialRecord> records;
};

struct SizeSummary {
  int size = 0;
  int dim = 0;
  int groups = 0;
  int max_group = 1;
  std::optional<double> crossing_n;         // 50% crossing, linear interpolation
  std::optional<double> crossing_rescaled;
};

struct PhaseResult {
  PhaseConfig config;
  std::vector<PhaseCell> cells;  // ordered by (size index, n index)
  std::vector<SizeSummary> sizes;
};

/// 2 sqrt(2) sigma ((1 - tau)/tau) sqrt(log p / n).
double theory_lambda(double sigma, double tau, int p, int n);
/// c sqrt(max_g |g| log |G| / n).
double proportional_lambda(double c, int max_group, int groups, int n);

/// First upward crossing of `level` by linear interpolation.
std::optional<double> crossing(const std::vector<double>& xs, const std::vector<double>& ys,
                               double level = 0.5);

std::uint64_t trial_seed(std::uint64_t master, int size_index, int n_index, int trial);

PhaseResult run_phase(const PhaseConfig& cfg, Execution mode = Execution::Parallel);

/// Seeded lasso instances checked for exact recovery and the primal-dual witness.
struct RecoveryCheckConfig {
  int instances = 50;
  int p = 20;
  int s = 3;
  int n = 200;
  double sigma = 0.01;
  double theta_min = 1.0;
  double theta_max = 2.0;
  double lambda_factor = 1.5;  // lambda = factor * window lo
  std::uint64_t seed = 0;
  int max_attempts = 2000;
};

struct RecoveryInstance {
  std::uint64_t seed = 0;
  double tau = 0.0;
  double tau_bar = 0.0;
  double m = 0.0;
  double lambda = 0.0;
  double window_lo = 0.0;
  double inactive_max = 0.0;    // ||theta_hat_I||_inf
  bool signs_ok = false;
  double l2_error = 0.0;
  double lasso_bound = 0.0; // (2/m)(1/(1-tau)) sqrt(|A|) lambda
  double theorem_bound = 0.0;
  double witness_gauge = kInf;
  bool witness_certified = false;
  bool converged = false;
};

struct RecoveryCheckResult {
  std::vector<RecoveryInstance> instances;
  int attempts = 0;
  int skipped = 0;  // drawn instances whose certificate failed or lambda left the window
  int failures = 0; // recovery or error bound violated
  int witness_failures = 0;
};

RecoveryCheckResult recovery_check(const RecoveryCheckConfig& cfg);

}  // namespace gdpen
