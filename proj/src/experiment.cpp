#include "gdpen/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gdpen/solver.hpp"

namespace gdpen {

const char* to_string(Family f) {
  switch (f) {
    case Family::Lasso: return "lasso";
    case Family::GeneralizedLasso: return "generalized_lasso";
    case Family::GroupGlasso: return "group_glasso";
  }
  return "lasso";
}

const char* to_string(LambdaRule r) { return r == LambdaRule::Theory ? "theory" : "proportional"; }

void PhaseConfig::validate() const {
  if (trials < 1) throw Error("PhaseConfig: trials must be at least 1");
  if (sizes.empty()) throw Error("PhaseConfig: sizes is empty");
  if (n_grid.empty()) throw Error("PhaseConfig: n_grid is empty");
  for (size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 1) throw Error("PhaseConfig: sample sizes must be positive");
    if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw Error("PhaseConfig: n_grid must be strictly increasing");
  }
  if (!(tau_target > 0.0 && tau_target < 1.0)) throw Error("PhaseConfig: tau_target must lie in (0, 1)");
  if (!(eps_supp > 0.0)) throw Error("PhaseConfig: eps_supp must be positive");
  for (int s : sizes) {
    if (family == Family::GroupGlasso) {
      if (s < 2) throw Error("PhaseConfig: group_glasso needs at least 2 nodes");
      BlockPrecisionSpec spec;
      spec.nodes = s;
      spec.block_size = block_size;
      spec.graph = graph;
      spec.delta = delta;
      spec.edge_weight = edge_weight;
      block_precision(spec);  // throws when the generator cannot produce a PD truth
    } else {
      if (s < 2) throw Error("PhaseConfig: dimension must be at least 2");
      if (sparsity < 0 || sparsity > (family == Family::Lasso ? s : s - 1))
        throw Error("PhaseConfig: sparsity does not fit the dimension");
    }
  }
}

double theory_lambda(double sigma, double tau, int p, int n) {
  return 2.0 * std::sqrt(2.0) * sigma * ((1.0 - tau) / tau) *
         std::sqrt(std::log(static_cast<double>(p)) / n);
}

double proportional_lambda(double c, int max_group, int groups, int n) {
  return c * std::sqrt(max_group * std::log(static_cast<double>(groups)) / n);
}

std::optional<double> crossing(const std::vector<double>& xs, const std::vector<double>& ys,
                               double level) {
  for (size_t i = 0; i < xs.size() && i < ys.size(); ++i) {
    if (ys[i] < level) continue;
    if (i == 0) return xs[0];
    const double f = (level - ys[i - 1]) / (ys[i] - ys[i - 1]);
    return xs[i - 1] + f * (xs[i] - xs[i - 1]);
  }
  return std::nullopt;
}

std::uint64_t trial_seed(std::uint64_t master, int size_index, int n_index, int trial) {
  return split_seed(master, {static_cast<std::uint64_t>(size_index),
                             static_cast<std::uint64_t>(n_index),
                             static_cast<std::uint64_t>(trial)});
}

namespace {

Matrix difference_matrix(int p) {
  Matrix d = Matrix::Zero(p - 1, p);
  for (int i = 0; i + 1 < p; ++i) {
    d(i, i) = -1.0;
    d(i, i + 1) = 1.0;
  }
  return d;
}

SizeSummary describe(const PhaseConfig& cfg, int size) {
  SizeSummary s;
  s.size = size;
  switch (cfg.family) {
    case Family::Lasso:
      s.dim = size;
      s.groups = size;
      s.max_group = 1;
      break;
    case Family::GeneralizedLasso:
      s.dim = size;
      s.groups = size - 1;
      s.max_group = 1;
      break;
    case Family::GroupGlasso: {
      const int d = size * cfg.block_size;
      s.dim = d * (d + 1) / 2;
      s.groups = size * (size - 1) / 2;
      s.max_group = cfg.block_size * cfg.block_size;
      break;
    }
  }
  return s;
}

double lambda_for(const PhaseConfig& cfg, const SizeSummary& s, int n) {
  if (cfg.lambda_rule == LambdaRule::Theory && cfg.family != Family::GroupGlasso)
    return theory_lambda(cfg.sigma, cfg.tau_target, s.groups, n);
  return proportional_lambda(cfg.lambda_const, s.max_group, s.groups, n);
}

void run_trial(const PhaseConfig& cfg, const SizeSummary& s, int n, double lambda,
               const Penalty& fit, TrialRecord& rec) {
  SolverOptions so;
  so.tol = cfg.tol;
  so.max_iter = cfg.max_iter;
  so.eps_supp = cfg.eps_supp;
  switch (cfg.family) {
    case Family::Lasso: {
      LinearSpec spec;
      spec.p = s.dim;
      spec.s = cfg.sparsity;
      spec.n = n;
      spec.sigma = cfg.sigma;
      spec.theta_min = cfg.theta_min;
      spec.theta_max = cfg.theta_min;
      const LinearDataset ds = gen_linear(spec, rec.seed);
      const EstimateResult er = solve(*ds.loss, fit, lambda, so);
      rec.converged = er.converged;
      rec.iterations = er.iterations;
      rec.l2_error = (er.theta_hat - ds.theta_star).norm();
      rec.success = er.converged && success_indicator(er.theta_hat, ds.estimand, cfg.eps_supp);
      if (cfg.attach_certificates) {
        const Penalty oracle = make_lasso(s.dim, ds.estimand.active);
        CertifyOptions co;
        co.theta_star = ds.theta_star;
        co.seed = rec.seed;
        const CertificateReport cr = certify(*ds.loss, oracle, co);
        rec.has_certificate = true;
        rec.irrep_ub = cr.irrep_sup.hi;
        rec.window_lo = cr.lambda_window.lo;
        rec.in_window = cr.overall() == Verdict::Pass && cr.lambda_window.contains(lambda);
      }
      break;
    }
    case Family::GeneralizedLasso: {
      // Piecewise-constant truth with `sparsity` jumps of size theta_min.
      std::mt19937_64 rng(mix64(rec.seed ^ 0x5bd1e995ULL));
      std::vector<int> pos(s.dim - 1);
      for (int i = 0; i < s.dim - 1; ++i) pos[i] = i;
      for (int k = 0; k < cfg.sparsity; ++k) {
        std::uniform_int_distribution<int> pick(k, s.dim - 2);
        std::swap(pos[k], pos[pick(rng)]);
      }
      std::bernoulli_distribution coin(0.5);
      Vector jumps = Vector::Zero(s.dim - 1);
      for (int k = 0; k < cfg.sparsity; ++k) jumps[pos[k]] = coin(rng) ? cfg.theta_min : -cfg.theta_min;
      Vector theta = Vector::Zero(s.dim);
      for (int i = 1; i < s.dim; ++i) theta[i] = theta[i - 1] + jumps[i - 1];
      LinearSpec spec;
      spec.p = s.dim;
      spec.n = n;
      spec.sigma = cfg.sigma;
      spec.theta_star = theta;
      spec.s = 0;
      const LinearDataset ds = gen_linear(spec, rec.seed);
      const EstimateResult er = solve(*ds.loss, fit, lambda, so);
      rec.converged = er.converged;
      rec.iterations = er.iterations;
      rec.l2_error = (er.theta_hat - theta).norm();
      const Matrix d = difference_matrix(s.dim);
      const EstimandSpec truth = EstimandSpec::from_theta(jumps);
      rec.success = er.converged && success_indicator(d * er.theta_hat, truth, cfg.eps_supp);
      break;
    }
    case Family::GroupGlasso: {
      BlockPrecisionSpec spec;
      spec.nodes = s.size;
      spec.block_size = cfg.block_size;
      spec.graph = cfg.graph;
      spec.delta = cfg.delta;
      spec.edge_weight = cfg.edge_weight;
      spec.n = n;
      const BlockPrecisionDataset ds = gen_block_precision(spec, rec.seed);
      const EstimateResult er = solve(*ds.loss, fit, lambda, so);
      rec.converged = er.converged;
      rec.iterations = er.iterations;
      rec.l2_error = (er.theta_hat - *ds.estimand.theta_star).norm();
      rec.success = er.converged && success_indicator(er.theta_hat, ds.estimand, cfg.eps_supp);
      break;
    }
  }
}

Penalty fit_penalty(const PhaseConfig& cfg, const SizeSummary& s) {
  switch (cfg.family) {
    case Family::Lasso: {
      IndexSet all(s.dim);
      for (int i = 0; i < s.dim; ++i) all[i] = i;
      return make_lasso(s.dim, all);
    }
    case Family::GeneralizedLasso: {
      IndexSet all(s.dim - 1);
      for (int i = 0; i < s.dim - 1; ++i) all[i] = i;
      return make_analysis(difference_matrix(s.dim), make_lasso(s.dim - 1, all));
    }
    case Family::GroupGlasso: {
      const auto groups = LogDetLoss::block_groups(s.size, cfg.block_size);
      IndexSet all(groups.size());
      for (size_t g = 0; g < groups.size(); ++g) all[g] = static_cast<int>(g);
      return make_group_lasso(s.dim, groups, all);
    }
  }
  throw Error("fit_penalty: unknown family");
}

}  // namespace

PhaseResult run_phase(const PhaseConfig& cfg, Execution mode) {
  cfg.validate();
  PhaseResult res;
  res.config = cfg;
  const int ns = static_cast<int>(cfg.sizes.size());
  const int nn = static_cast<int>(cfg.n_grid.size());
  std::vector<Penalty> fits;
  for (int si = 0; si < ns; ++si) {
    res.sizes.push_back(describe(cfg, cfg.sizes[si]));
    fits.push_back(fit_penalty(cfg, res.sizes.back()));
  }

  const std::size_t total = static_cast<std::size_t>(ns) * nn * cfg.trials;
  std::vector<TrialRecord> records(total);
  for_each_index(total, mode, [&](std::size_t idx) {
    const int trial = static_cast<int>(idx % cfg.trials);
    const int ni = static_cast<int>((idx / cfg.trials) % nn);
    const int si = static_cast<int>(idx / (static_cast<std::size_t>(cfg.trials) * nn));
    TrialRecord& rec = records[idx];
    rec.seed = trial_seed(cfg.master_seed, si, ni, trial);
    const int n = cfg.n_grid[ni];
    rec.lambda = lambda_for(cfg, res.sizes[si], n);
    try {
      run_trial(cfg, res.sizes[si], n, rec.lambda, fits[si], rec);
    } catch (const std::exception& e) {
      // A failed solve counts as a failed trial and stays in the record.
      rec.success = false;
      rec.converged = false;
      rec.error = e.what();
    }
  });

  for (int si = 0; si < ns; ++si) {
    std::vector<double> xs, xr, ys;
    SizeSummary& sz = res.sizes[si];
    for (int ni = 0; ni < nn; ++ni) {
      PhaseCell cell;
      cell.size_index = si;
      cell.n_index = ni;
      cell.size = cfg.sizes[si];
      cell.n = cfg.n_grid[ni];
      cell.trials = cfg.trials;
      cell.lambda = lambda_for(cfg, sz, cell.n);
      cell.rescaled = cell.n / (sz.max_group * std::log(static_cast<double>(sz.groups)));
      double err = 0.0;
      const std::size_t base = (static_cast<std::size_t>(si) * nn + ni) * cfg.trials;
      for (int t = 0; t < cfg.trials; ++t) {
        const TrialRecord& rec = records[base + t];
        cell.successes += rec.success ? 1 : 0;
        cell.nonconverged += rec.converged ? 0 : 1;
        cell.certified += rec.in_window ? 1 : 0;
        err += rec.l2_error;
      }
      cell.success_fraction = static_cast<double>(cell.successes) / cfg.trials;
      cell.mean_l2_error = err / cfg.trials;
      if (cfg.attach_certificates)
        cell.records.assign(records.begin() + base, records.begin() + base + cfg.trials);
      xs.push_back(cell.n);
      xr.push_back(cell.rescaled);
      ys.push_back(cell.success_fraction);
      res.cells.push_back(std::move(cell));
    }
    sz.crossing_n = crossing(xs, ys);
    sz.crossing_rescaled = crossing(xr, ys);
  }
  return res;
}

RecoveryCheckResult recovery_check(const RecoveryCheckConfig& cfg) {
  RecoveryCheckResult out;
  LinearSpec spec;
  spec.p = cfg.p;
  spec.s = cfg.s;
  spec.n = cfg.n;
  spec.sigma = cfg.sigma;
  spec.theta_min = cfg.theta_min;
  spec.theta_max = cfg.theta_max;
  IndexSet all(cfg.p);
  for (int i = 0; i < cfg.p; ++i) all[i] = i;
  const Penalty fit = make_lasso(cfg.p, all);

  for (int attempt = 0; attempt < cfg.max_attempts &&
                        static_cast<int>(out.instances.size()) < cfg.instances;
       ++attempt) {
    ++out.attempts;
    const std::uint64_t seed = split_seed(cfg.seed, {static_cast<std::uint64_t>(attempt)});
    const LinearDataset ds = gen_linear(spec, seed);
    const Penalty oracle = make_lasso(cfg.p, ds.estimand.active);
    CertifyOptions co;
    co.theta_star = ds.theta_star;
    co.seed = seed;
    const CertificateReport cr = certify(*ds.loss, oracle, co);
    if (cr.overall() != Verdict::Pass || cr.lambda_window.empty) {
      ++out.skipped;
      continue;
    }
    const double lambda = cfg.lambda_factor * cr.lambda_window.lo;
    if (!cr.lambda_window.contains(lambda)) {
      ++out.skipped;
      continue;
    }
    RecoveryInstance inst;
    inst.seed = seed;
    inst.tau = cr.tau;
    inst.tau_bar = cr.tau_bar;
    inst.m = cr.m_C;
    inst.lambda = lambda;
    inst.window_lo = cr.lambda_window.lo;
    const double s_count = static_cast<double>(ds.estimand.active.size());
    inst.lasso_bound = 2.0 / cr.m_C / (1.0 - cr.tau) * std::sqrt(s_count) * lambda;
    inst.theorem_bound = theorem_error_bound(cr, lambda);

    const EstimateResult er = solve(*ds.loss, fit, lambda);
    inst.converged = er.converged;
    inst.l2_error = (er.theta_hat - ds.theta_star).norm();
    std::vector<char> active(cfg.p, 0);
    for (int i : ds.estimand.active) active[i] = 1;
    inst.signs_ok = true;
    for (int i = 0; i < cfg.p; ++i) {
      if (active[i]) {
        if ((er.theta_hat[i] > 0) != (ds.theta_star[i] > 0) || er.theta_hat[i] == 0.0)
          inst.signs_ok = false;
      } else {
        inst.inactive_max = std::max(inst.inactive_max, std::abs(er.theta_hat[i]));
      }
    }
    const bool ok = inst.converged && inst.inactive_max <= 1e-6 && inst.signs_ok &&
                    inst.l2_error <= inst.lasso_bound;
    if (!ok) ++out.failures;

    const EstimateResult rr = solve_restricted(*ds.loss, oracle, lambda);
    const WitnessReport w = dual_certificate(*ds.loss, oracle, lambda, rr.theta_hat);
    inst.witness_gauge = w.gauge_I_of_u_I;
    inst.witness_certified = w.certified_unique;
    if (!w.certified_unique) ++out.witness_failures;
    out.instances.push_back(inst);
  }
  return out;
}

}  // namespace gdpen
