// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "gdpen/certification.hpp"
#include "gdpen/experiment.hpp"
#include "gdpen/io.hpp"
#include "gdpen/report.hpp"
#include "gdpen/solver.hpp"
#include "oracles.hpp"

using namespace gdpen;
namespace fs = std::filesystem;
using oracle::randn;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string f(double x, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << x;
  return os.str();
}

IndexSet all_of(int p) {
  IndexSet a(p);
  for (int i = 0; i < p; ++i) a[i] = i;
  return a;
}

double V(const Penalty& rho, const Vector& z) {
  const VResult r = V_value(rho, z);
  return r.value.unbounded ? kInf : r.value.value;
}

Matrix difference(int p) {
  Matrix d = Matrix::Zero(p - 1, p);
  for (int i = 0; i + 1 < p; ++i) {
    d(i, i) = -1;
    d(i, i + 1) = 1;
  }
  return d;
}

// 1. V semi-norm axioms on M-perp, 500 cases, tol 1e-8, < 10 s.
Outcome criterion1() {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> pick(0, 4);
  std::uniform_real_distribution<double> ua(0.0, 5.0);
  int bad = 0;
  double worst = 0.0;
  for (int c = 0; c < 500; ++c) {
    Penalty rho = make_lasso(1, {0});
    switch (pick(rng)) {
      case 0: rho = make_lasso(7, {0, 3}); break;
      case 1: rho = make_group_lasso(8, {{0, 1}, {2, 3, 4}, {5, 6, 7}}, {1}); break;
      case 2: rho = make_analysis(difference(6), make_lasso(5, {2})); break;
      case 3: {
        GroupLassoOptions o;
        o.duplicate_overlaps = true;
        rho = make_group_lasso(5, {{0, 1, 2}, {2, 3}, {3, 4}}, {0}, o);
        break;
      }
      default: rho = make_hybrid(make_lasso(3, {0}), make_group_lasso(3, {{0, 1}, {2}}, {1})); break;
    }
    const Subspace mp = rho.M().complement();
    const Vector z = project(mp, randn(rho.dim(), rng));
    const Vector w = project(mp, randn(rho.dim(), rng));
    const double a = ua(rng);
    const double vz = V(rho, z), vw = V(rho, w);
    const double hom = std::abs(V(rho, a * z) - a * vz) - 1e-8 * (1 + vz);
    const double tri = V(rho, z + w) - vz - vw - 1e-8;
    worst = std::max({worst, hom, tri});
    if (hom > 0 || tri > 0 || !std::isfinite(vz)) ++bad;
  }
  return {bad == 0, "violations " + std::to_string(bad) + "/500, worst excess " + f(worst)};
}

// 2. Irrep lasso path vs sign-vector brute force (1e-8); generic V vs closed forms (1e-7).
Outcome criterion2() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> up(3, 10);
  double irrep_err = 0.0, v_err = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int p = up(rng);
    std::uniform_int_distribution<int> ua(1, std::min(5, p - 1));
    const int k = ua(rng);
    std::vector<int> perm = all_of(p);
    std::shuffle(perm.begin(), perm.end(), rng);
    IndexSet a(perm.begin(), perm.begin() + k);
    std::sort(a.begin(), a.end());
    const Matrix q = oracle::random_pd(p, rng);
    const Penalty rho = make_lasso(p, a);
    const IrrepResult r = irrep_check(rho, q);
    const double brute = oracle::lasso_irrep_brute(q, a, oracle::complement_of(p, a));
    irrep_err = std::max({irrep_err, std::abs(r.sup.hi - brute), std::abs(r.sup.lo - brute)});

    // Closed-form V against bisection, for the lasso and a group lasso on the same p.
    std::vector<IndexSet> groups;
    for (int i = 0; i < p; i += 2) groups.push_back(i + 1 < p ? IndexSet{i, i + 1} : IndexSet{i});
    const Penalty gl = make_group_lasso(p, groups, {0});
    for (const Penalty* pr : {&rho, &gl}) {
      for (int s = 0; s < 4; ++s) {
        const Vector z = project(pr->M().complement(), randn(p, rng));
        const double closed = V(*pr, z);
        const double gen = V_value_generic(*pr, z).value.value;
        v_err = std::max(v_err, std::abs(closed - gen) / std::max(1.0, closed));
      }
    }
  }
  return {irrep_err <= 1e-8 && v_err <= 1e-7,
          "max irrep error " + f(irrep_err) + ", max V error " + f(v_err)};
}

RecoveryCheckResult& recovery_run() {
  static RecoveryCheckResult res = [] {
    RecoveryCheckConfig cfg;
    cfg.seed = 303;
    return recovery_check(cfg);
  }();
  return res;
}

// 3. Exact model selection and the lasso error bound on 50 certified instances.
Outcome criterion3() {
  const RecoveryCheckResult& r = recovery_run();
  double worst_ratio = 0.0, worst_inactive = 0.0;
  for (const RecoveryInstance& i : r.instances) {
    worst_ratio = std::max(worst_ratio, i.l2_error / i.lasso_bound);
    worst_inactive = std::max(worst_inactive, i.inactive_max);
  }
  const int n = static_cast<int>(r.instances.size());
  return {n == 50 && r.failures == 0,
          std::to_string(n) + " instances (" + std::to_string(r.attempts) + " drawn), failures " +
              std::to_string(r.failures) + ", max error/bound " + f(worst_ratio) +
              ", max |theta_I| " + f(worst_inactive)};
}

// 4. The witness certifies every instance of criterion 3.
Outcome criterion4() {
  const RecoveryCheckResult& r = recovery_run();
  double worst = 0.0;
  for (const RecoveryInstance& i : r.instances) worst = std::max(worst, i.witness_gauge);
  const int n = static_cast<int>(r.instances.size());
  return {n == 50 && r.witness_failures == 0,
          std::to_string(n - r.witness_failures) + "/" + std::to_string(n) +
              " certified, max gamma_I(u_I) " + f(worst)};
}

// 5. Lasso phase transition with the theory lambda.
Outcome criterion5() {
  PhaseConfig cfg;
  cfg.family = Family::Lasso;
  cfg.sizes = {64, 128};
  cfg.n_grid = {10, 20, 40, 60, 80, 100, 130, 160, 200, 250, 300, 400};
  cfg.trials = 100;
  cfg.sigma = 0.5;
  cfg.sparsity = 4;
  cfg.lambda_rule = LambdaRule::Theory;
  cfg.master_seed = 505;
  const PhaseResult r = run_phase(cfg);
  const int nn = static_cast<int>(cfg.n_grid.size());
  bool ok = true;
  std::ostringstream os;
  std::vector<double> cs;
  for (size_t si = 0; si < cfg.sizes.size(); ++si) {
    const int p = cfg.sizes[si];
    double lo = 1.0, hi = 0.0, dip = 0.0;
    for (int ni = 0; ni < nn; ++ni) {
      const double s = r.cells[si * nn + ni].success_fraction;
      lo = std::min(lo, s);
      hi = std::max(hi, s);
      if (ni > 0) dip = std::max(dip, r.cells[si * nn + ni - 1].success_fraction - s);
    }
    // Smallest grid n from which success stays >= 0.95.
    int nmin = -1;
    for (int ni = nn - 1; ni >= 0 && r.cells[si * nn + ni].success_fraction >= 0.95; --ni)
      nmin = cfg.n_grid[ni];
    const double c = nmin > 0 ? nmin / (cfg.sparsity * std::log(static_cast<double>(p))) : kInf;
    cs.push_back(c);
    ok = ok && lo <= 0.1 && hi >= 0.95 && dip <= 0.1 && nmin > 0;
    os << "p=" << p << ": min " << f(lo, 3) << " max " << f(hi, 3) << " dip " << f(dip, 3)
       << " n95 " << nmin << "; ";
  }
  const double c = *std::max_element(cs.begin(), cs.end());
  // With the fitted C, every grid point with n >= C s log p must reach 0.95.
  for (size_t si = 0; si < cfg.sizes.size() && std::isfinite(c); ++si)
    for (int ni = 0; ni < nn; ++ni)
      if (cfg.n_grid[ni] >= c * cfg.sparsity * std::log(static_cast<double>(cfg.sizes[si])))
        ok = ok && r.cells[si * nn + ni].success_fraction >= 0.95;
  os << "fitted C " << f(c, 3);
  return {ok, os.str()};
}

// 6. Grouped graphical lasso: ordered raw crossings, rescaled crossings within 25% of their mean.
Outcome criterion6() {
  PhaseConfig cfg;  // defaults: nodes {16,25,36}, b = 2, n 100..1000, 100 trials
  cfg.master_seed = 606;
  const PhaseResult r = run_phase(cfg);
  std::ostringstream os;
  bool ok = true;
  std::vector<double> raw, res;
  for (const SizeSummary& s : r.sizes) {
    os << "nodes " << s.size << ": n50 ";
    if (s.crossing_n) {
      os << f(*s.crossing_n) << " rescaled " << f(*s.crossing_rescaled) << "; ";
      raw.push_back(*s.crossing_n);
      res.push_back(*s.crossing_rescaled);
    } else {
      os << "none; ";
      ok = false;
    }
  }
  if (ok) {
    for (size_t i = 1; i < raw.size(); ++i) ok = ok && raw[i] > raw[i - 1];
    double mean = 0.0;
    for (double x : res) mean += x / res.size();
    double spread = 0.0;
    for (double x : res) spread = std::max(spread, std::abs(x - mean) / mean);
    ok = ok && spread <= 0.25;
    os << "max rescaled deviation " << f(100 * spread, 3) << "%";
  }
  return {ok, os.str()};
}

// 7. Converse: violation >= 1.2, Wilson upper bound of the best success rate < 0.6.
Outcome criterion7() {
  Matrix q(3, 3);
  q << 1, 0, 0.6, 0, 1, 0.6, 0.6, 0.6, 1;
  Vector ts(3);
  ts << 1, 1, 0;
  ConverseOptions opts;
  opts.trials = 400;
  opts.n = 200;
  opts.seed = 707;
  const ConverseReport r = converse_check(make_lasso(3, {0, 1}), q, ts, opts);
  return {r.applicable && r.violation >= 1.2 - 1e-12 && r.wilson.hi < 0.6,
          "violation " + f(r.violation) + ", best success " + f(r.max_success, 3) + " at lambda " +
              f(r.best_lambda, 3) + ", Wilson [" + f(r.wilson.lo, 3) + ", " + f(r.wilson.hi, 3) + "]"};
}

// 8. Solver oracles, prox brute force, finite-difference gradients.
Outcome criterion8() {
  std::mt19937_64 rng(808);
  double solve_err = 0.0;
  std::uniform_real_distribution<double> ul(0.02, 0.5);
  for (int t = 0; t < 100; ++t) {
    const int p = 2 + t % 7;
    const int n = 25;
    Matrix x(n, p);
    for (int c = 0; c < p; ++c) x.col(c) = randn(n, rng);
    const Vector y = x * randn(p, rng) + randn(n, rng);
    const double lambda = ul(rng);
    const Vector ref = *oracle::lasso_enumeration(x.transpose() * x / n, x.transpose() * y / n, lambda);
    const EstimateResult r = solve(SquaredLoss(x, y), make_lasso(p, all_of(p)), lambda);
    solve_err = std::max(solve_err, (r.theta_hat - ref).lpNorm<Eigen::Infinity>());
  }

  // Prox against golden-section search: 1-D soft threshold and 2-D group shrinkage (radial).
  double prox_err = 0.0;
  std::uniform_real_distribution<double> uv(-3, 3), ut(0.0, 1.5);
  const Penalty l1 = make_lasso(1, {0});
  const Penalty g2 = make_group_lasso(2, {{0, 1}}, {0});
  auto golden = [](const std::function<double(double)>& fn, double lo, double hi) {
    const double g = (std::sqrt(5.0) - 1) / 2;
    for (int k = 0; k < 200; ++k) {
      const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
      if (fn(a) < fn(b)) hi = b;
      else lo = a;
    }
    return 0.5 * (lo + hi);
  };
  for (int t = 0; t < 100; ++t) {
    const double v = uv(rng), tt = ut(rng);
    Vector v1(1);
    v1 << v;
    const double b1 = golden([&](double x) { return 0.5 * (x - v) * (x - v) + tt * std::abs(x); }, -4, 4);
    prox_err = std::max(prox_err, std::abs(prox(l1, v1, tt)[0] - b1));

    Vector v2(2);
    v2 << uv(rng), uv(rng);
    const Vector dir = v2.normalized();
    const double r2 = golden([&](double s) { return 0.5 * (s * dir - v2).squaredNorm() + tt * std::abs(s); },
                             -1, v2.norm() + 1);
    prox_err = std::max(prox_err, (prox(g2, v2, tt) - r2 * dir).norm());
  }

  // Gradients of every loss kind at 50 points.
  double grad_err = 0.0;
  Matrix x(30, 5);
  for (int c = 0; c < 5; ++c) x.col(c) = randn(30, rng);
  const SquaredLoss sq(x, randn(30, rng));
  const ExpFamilyLoss ga(randn(5, rng), gaussian_log_partition(), 30);
  const ExpFamilyLoss be(Vector::Constant(5, 0.3), bernoulli_log_partition(), 30);
  const ExpFamilyLoss po(Vector::Constant(5, 1.5), poisson_log_partition(), 30);
  Matrix z(60, 4);
  for (int c = 0; c < 4; ++c) z.col(c) = randn(60, rng);
  const LogDetLoss ld(z.transpose() * z / 60, 60);
  for (int t = 0; t < 50; ++t) {
    for (const Loss* loss : std::vector<const Loss*>{&sq, &ga, &be, &po}) {
      const Vector th = randn(5, rng);
      const Vector fd = oracle::fd_gradient([&](const Vector& v) { return loss->value(v); }, th);
      grad_err = std::max(grad_err, oracle::gradient_error(loss->gradient(th), fd));
    }
    Matrix a(4, 4);
    for (int c = 0; c < 4; ++c) a.col(c) = 0.3 * randn(4, rng);
    const Vector th = ld.from_matrix(Matrix::Identity(4, 4) + a * a.transpose());
    const Vector fd = oracle::fd_gradient([&](const Vector& v) { return ld.value(v); }, th);
    grad_err = std::max(grad_err, oracle::gradient_error(ld.gradient(th), fd));
  }
  return {solve_err <= 1e-6 && prox_err <= 1e-7 && grad_err <= 1e-5,
          "solve vs enumeration " + f(solve_err) + ", prox vs brute force " + f(prox_err) +
              ", gradient relative error " + f(grad_err)};
}

// 9. Byte-identical phase outputs across GDPEN_THREADS values.
Outcome criterion9() {
  PhaseConfig cfg;
  cfg.family = Family::Lasso;
  cfg.sizes = {16, 24};
  cfg.n_grid = {20, 40, 80};
  cfg.trials = 10;
  cfg.sparsity = 2;
  cfg.lambda_rule = LambdaRule::Theory;
  cfg.master_seed = 909;
  const fs::path base = fs::temp_directory_path() / "gdpen_acceptance_determinism";
  fs::remove_all(base);
  std::vector<std::string> outputs;
  for (const char* threads : {"1", "2", "4"}) {
    setenv("GDPEN_THREADS", threads, 1);
    const fs::path dir = base / threads;
    emit_report(run_phase(cfg), dir);
    outputs.push_back(read_text(dir / "phase.json") + read_text(dir / "phase.csv") +
                      read_text(dir / "phase.svg"));
  }
  unsetenv("GDPEN_THREADS");
  const bool same = outputs[0] == outputs[1] && outputs[1] == outputs[2];
  return {same, same ? "JSON/CSV/SVG identical for GDPEN_THREADS in {1,2,4}" : "outputs differ"};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {
      {1, "V semi-norm suite", 10, criterion1},
      {2, "irrepresentability oracle equivalence", 30, criterion2},
      {3, "deterministic exact-recovery reproduction", 60, criterion3},
      {4, "dual certificate", 60, criterion4},
      {5, "phase transition, lasso", 300, criterion5},
      {6, "phase transition, grouped graphical lasso", 1200, criterion6},
      {7, "converse demonstration", 300, criterion7},
      {8, "solver oracles", 60, criterion8},
      {9, "determinism across worker counts", 120, criterion9},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const Criterion& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::cout << (pass ? "PASS" : "FAIL") << "  " << c.id << ". " << c.name << "  [" << o.detail
              << "; " << f(secs, 3) << " s of " << c.budget_s << " s" << (in_time ? "" : " EXCEEDED")
              << "]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
