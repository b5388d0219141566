#include <doctest.h>

#include <cmath>
#include <random>

#include "gdpen/certification.hpp"
#include "gdpen/datasets.hpp"
#include "oracles.hpp"

using namespace gdpen;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(xs.size());
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

using oracle::complement_of;
using oracle::lasso_irrep_brute;
using oracle::random_pd;
using oracle::randn;

double V(const Penalty& rho, const Vector& z) {
  const VResult r = V_value(rho, z);
  return r.value.unbounded ? kInf : r.value.value;
}

Matrix two_by_two(double a, double b, double c) {
  Matrix q(2, 2);
  q << a, b, b, c;
  return q;
}

}  // namespace

TEST_CASE("V examples") {
  const Penalty lasso = make_lasso(4, {0, 1});
  CHECK(V(lasso, vec({0, 0, 0.3, -0.7})) == doctest::Approx(0.7));
  CHECK(V_value_generic(lasso, vec({0, 0, 0.3, -0.7})).value.value == doctest::Approx(0.7).epsilon(1e-7));
  CHECK(V(lasso, Vector::Zero(4)) == 0.0);
  const Penalty gl = make_group_lasso(4, {{0, 1}, {2, 3}}, {0});
  CHECK(V(gl, vec({0, 0, 3, 4})) == doctest::Approx(5.0));
}

TEST_CASE("V with a nontrivial S uses the S-perp slack") {
  // S = span{e1, e2}: S-perp absorbs the third coordinate for free.
  Matrix basis(3, 2);
  basis << 1, 0, 0, 1, 0, 0;
  GroupLassoOptions opts;
  opts.subspace_basis = basis;
  const Penalty gl = make_group_lasso(3, {{0}, {1}, {2}}, {0}, opts);
  CHECK(V(gl, vec({0, 0.4, 5.0})) == doctest::Approx(0.4).epsilon(1e-7));
  const VResult r = V_value(gl, vec({0, 0.4, 5.0}));
  CHECK((r.u_I + r.u_S_perp - vec({0, 0.4, 5.0})).norm() <= 1e-8);
}

TEST_CASE("V with duplicated overlaps sits inside the generic bracket") {
  std::mt19937_64 rng(21);
  GroupLassoOptions o;
  o.duplicate_overlaps = true;
  const Penalty rho = make_group_lasso(5, {{0, 1, 2}, {2, 3}, {3, 4}}, {0}, o);
  const Matrix n = rho.S().complement().basis();
  for (int t = 0; t < 20; ++t) {
    const Vector z = project(rho.M().complement(), randn(rho.dim(), rng));
    const VResult r = V_value(rho, z);
    const VResult g = V_value_generic(rho, z);
    REQUIRE_FALSE(r.value.unbounded);
    CHECK(r.value.value >= g.bracket.lo - 1e-8 * (1 + g.bracket.lo));
    CHECK(r.value.value <= g.bracket.hi + 1e-8 * (1 + g.bracket.hi));
    // u_S_perp really lies in S-perp.
    const Vector c = n.transpose() * r.u_S_perp;
    CHECK((n * c - r.u_S_perp).norm() <= 1e-9 * (1 + z.norm()));
  }
}

TEST_CASE("closed-form V matches the generic path") {
  std::mt19937_64 rng(12);
  const Penalty lasso = make_lasso(6, {0, 4});
  const Penalty gl = make_group_lasso(6, {{0, 1}, {2, 3}, {4, 5}}, {1});
  for (int t = 0; t < 100; ++t) {
    for (const Penalty* rho : {&lasso, &gl}) {
      const Vector z = project(rho->M().complement(), randn(6, rng));
      const double closed = V(*rho, z);
      const VResult g = V_value_generic(*rho, z);
      CHECK(std::abs(closed - g.value.value) <= 1e-7 * std::max(1.0, closed));
    }
  }
}

TEST_CASE("V is a semi-norm on M-perp") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> ua(0.0, 4.0);
  Matrix d = Matrix::Zero(4, 5);
  for (int i = 0; i < 4; ++i) {
    d(i, i) = -1;
    d(i, i + 1) = 1;
  }
  const std::vector<Penalty> ps = {make_lasso(5, {1}), make_group_lasso(6, {{0, 1}, {2, 3}, {4, 5}}, {0}),
                                   make_analysis(d, make_lasso(4, {1}))};
  for (const Penalty& rho : ps) {
    const Subspace mp = rho.M().complement();
    for (int t = 0; t < 30; ++t) {
      const Vector z = project(mp, randn(rho.dim(), rng));
      const Vector w = project(mp, randn(rho.dim(), rng));
      const double a = ua(rng);
      const double vz = V(rho, z);
      CHECK(std::abs(V(rho, a * z) - a * vz) <= 1e-8 * (1 + vz));
      CHECK(V(rho, z + w) <= vz + V(rho, w) + 1e-8);
    }
  }
}

TEST_CASE("irrepresentability examples") {
  const Penalty rho = make_lasso(2, {0});
  const IrrepResult r = irrep_check(rho, two_by_two(1, 0.5, 1));
  CHECK(r.sup.hi == doctest::Approx(0.5));
  CHECK(r.sup.lo == doctest::Approx(0.5));
  CHECK(r.tau == doctest::Approx(0.5));
  CHECK(r.verdict == Verdict::Pass);

  const IrrepResult id = irrep_check(make_lasso(4, {0, 1}), Matrix::Identity(4, 4));
  CHECK(id.sup.hi <= 1e-15);
  CHECK(id.verdict == Verdict::Pass);

  const IrrepResult bad = irrep_check(rho, two_by_two(1, 1.2, 2));
  CHECK(bad.sup.lo == doctest::Approx(1.2));
  CHECK(bad.verdict == Verdict::Fail);
}

TEST_CASE("irrepresentability: rank deficiency is an error") {
  Matrix q = Matrix::Zero(3, 3);
  q(2, 2) = 1.0;
  CHECK_THROWS_AS(irrep_check(make_lasso(3, {0, 1}), q), RankDeficiencyError);
}

TEST_CASE("lasso irrepresentability matches sign-vector enumeration") {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 30; ++t) {
    const Matrix q = random_pd(6, rng);
    const IndexSet a = {0, 2, 5};
    const IrrepResult r = irrep_check(make_lasso(6, a), q);
    CHECK(std::abs(r.sup.hi - lasso_irrep_brute(q, a, complement_of(6, a))) <= 1e-8);
  }
}

TEST_CASE("atom path agrees with the lasso closed form") {
  std::mt19937_64 rng(15);
  for (int t = 0; t < 10; ++t) {
    const Matrix q = random_pd(4, rng);
    // A = conv{(+-1, +-1, 0, 0)} equals the box on the first two coordinates.
    Matrix atoms = Matrix::Zero(4, 4);
    atoms << 1, 1, -1, -1, 1, -1, 1, -1, 0, 0, 0, 0, 0, 0, 0, 0;
    const Penalty custom = make_custom(ConvexSet::atoms(atoms), ConvexSet::coord_box(4, {2, 3}), Subspace::full(4));
    const IrrepResult ra = irrep_check(custom, q);
    const IrrepResult rl = irrep_check(make_lasso(4, {0, 1}), q);
    CHECK(ra.method == "atoms");
    CHECK(std::abs(ra.sup.hi - rl.sup.hi) <= 1e-8);
    CHECK(std::abs(ra.sup.lo - rl.sup.lo) <= 1e-8);
  }
}

TEST_CASE("group irrepresentability interval brackets sampled values") {
  std::mt19937_64 rng(16);
  const std::vector<IndexSet> groups = {{0, 1}, {2, 3}, {4, 5}};
  const Penalty gl = make_group_lasso(6, groups, {0, 1});
  for (int t = 0; t < 5; ++t) {
    const Matrix q = random_pd(6, rng);
    const IrrepResult r = irrep_check(gl, q, 1);
    CHECK(r.sup.lo <= r.sup.hi + 1e-12);
    const IrrepMap k = irrep_map(gl, q);
    for (int s = 0; s < 200; ++s) {
      Vector z = Vector::Zero(6);
      for (int g : {0, 1}) {
        const Vector u = randn(2, rng).normalized();
        z[groups[g][0]] = u[0];
        z[groups[g][1]] = u[1];
      }
      CHECK(V(gl, k.K * z) <= r.sup.hi + 1e-9);
    }
  }
}

TEST_CASE("compatibility constants for the lasso") {
  const Penalty rho = make_lasso(4, {0, 1});
  const Compatibility c = compatibility_constants(rho, ErrorNorm::Linf, Matrix::Identity(4, 4));
  CHECK(c.kappa_A == doctest::Approx(std::sqrt(2.0)));
  CHECK(c.kappa_err == doctest::Approx(1.0));
  CHECK(c.kappa_err_star == doctest::Approx(std::sqrt(2.0)));

  // tau_bar over the error-norm ball restricted to M reproduces ||Q_IA Q_AA^{-1}||_inf;
  // the unrestricted sup also picks up the -z_I term of the map.
  const Compatibility c2 = compatibility_constants(make_lasso(2, {0}), ErrorNorm::Linf, two_by_two(1, 0.5, 1));
  CHECK(c2.tau_bar_restricted == doctest::Approx(0.5));
  CHECK(c2.tau_bar == doctest::Approx(1.5));

  const Compatibility full = compatibility_constants(make_lasso(3, {0, 1, 2}), ErrorNorm::Linf, Matrix::Identity(3, 3));
  CHECK(full.tau_bar == 0.0);
}

TEST_CASE("tau_bar dominates the irrepresentable map on the error ball") {
  std::mt19937_64 rng(17);
  const std::vector<IndexSet> groups = {{0, 1}, {2, 3}, {4, 5}};
  const std::vector<std::pair<Penalty, ErrorNorm>> cases = {
      {make_lasso(6, {1, 3}), ErrorNorm::Linf},
      {make_lasso(6, {1, 3}), ErrorNorm::L2},
      {make_group_lasso(6, groups, {0}), ErrorNorm::GroupLinf},
      {make_group_lasso(6, groups, {0}), ErrorNorm::L2}};
  for (const auto& [rho, norm] : cases) {
    const Matrix q = random_pd(6, rng);
    const Compatibility c = compatibility_constants(rho, norm, q, 3);
    const double tb = c.exact ? c.tau_bar : c.tau_bar * c.safety_factor;
    const IrrepMap k = irrep_map(rho, q);
    const auto gs = penalty_groups(rho);
    for (int s = 0; s < 200; ++s) {
      Vector x = randn(6, rng);
      x /= error_norm(norm, x, gs);
      CHECK(V(rho, k.K * x) <= tb * (1 + 1e-8));
    }
  }
}

TEST_CASE("smoothness constants") {
  const Matrix x = vec({2.0, std::sqrt(6.0)}).asDiagonal();
  const SquaredLoss sq(x, Vector::Zero(2));
  const Smoothness s = smoothness_constants(sq, make_lasso(2, {0}), Vector::Zero(2), 1.0);
  CHECK(s.m_C == doctest::Approx(2.0));
  CHECK(s.L_C == 0.0);

  const ExpFamilyLoss half(Vector::Zero(3), gaussian_log_partition(), 10);
  CHECK(smoothness_constants(half, make_lasso(3, {1}), Vector::Zero(3), 1.0).m_C == doctest::Approx(1.0));
  CHECK(smoothness_constants(half, make_lasso(3, {0, 1, 2}), Vector::Zero(3), 1.0).m_C == doctest::Approx(1.0));

  const LogDetLoss ld(Matrix::Identity(3, 3), 50);
  const Vector id = ld.from_matrix(Matrix::Identity(3, 3));
  IndexSet all(6);
  for (int i = 0; i < 6; ++i) all[i] = i;
  // Evaluated exactly at theta_star with a vanishing ball.
  const Smoothness sl = smoothness_constants(ld, make_lasso(6, all), id, 0.0);
  CHECK(sl.m_C == doctest::Approx(1.0));
}

TEST_CASE("lambda window and error bound arithmetic") {
  CertificateReport r;
  r.tau = 0.5;
  r.tau_bar = 0.5;
  r.kappa_err = 1.0;
  r.kappa_A = std::sqrt(2.0);
  r.kappa_err_star = std::sqrt(2.0);
  r.m_C = 2.0;
  r.L_C = 0.0;
  r.irrepresentable = Verdict::Pass;
  r.rss = Verdict::Pass;
  LambdaWindow w = lambda_window(r, 0.1);
  CHECK(w.lo == doctest::Approx(0.2));
  CHECK(std::isinf(w.hi));
  CHECK(lambda_window(r, 0.0).lo == 0.0);
  CHECK(theorem_error_bound(r, 0.1) == doctest::Approx(0.1 * 1.5 * std::sqrt(2.0)));
  CHECK(theorem_error_bound(r, 0.0) == 0.0);

  r.L_C = 3.0;
  w = lambda_window(r, 0.01);
  // hi = m^2 tau / (L kappa_err (2 kappa_A + (tau/tau_bar) kappa*)^2 tau_bar)
  const double hi = 4.0 * 0.5 / (3.0 * 1.0 * std::pow(2 * std::sqrt(2.0) + std::sqrt(2.0), 2) * 0.5);
  CHECK(w.hi == doctest::Approx(hi));
  CHECK(w.lo == doctest::Approx(0.02));
  CHECK_FALSE(w.empty);
  CHECK(lambda_window(r, 0.1).empty);

  r.tau_bar = 0.0;
  const LambdaWindow d = lambda_window(r, 0.1);
  CHECK(d.degenerate);
  CHECK(d.lo == 0.0);
}

TEST_CASE("lasso error bound from compatibility constants") {
  std::mt19937_64 rng(18);
  for (int t = 0; t < 10; ++t) {
    Matrix q = random_pd(5, rng);
    const IndexSet a = {0, 3};
    const SquaredLoss loss(q.llt().matrixU().toDenseMatrix() * std::sqrt(5.0), Vector::Zero(5));
    CertifyOptions co;
    co.theta_star = vec({1, 0, 0, -1, 0});
    const CertificateReport r = certify(loss, make_lasso(5, a), co);
    if (r.irrepresentable != Verdict::Pass) continue;
    const double direct = 2.0 / r.m_C * (r.kappa_A + r.tau / (2 * r.tau_bar) * r.kappa_err_star) * 0.3;
    CHECK(theorem_error_bound(r, 0.3) == doctest::Approx(direct));
    CHECK(r.kappa_A == doctest::Approx(std::sqrt(2.0)));
  }
}

TEST_CASE("certify: irrep sup interval and verdict invariants") {
  std::mt19937_64 rng(19);
  for (int t = 0; t < 20; ++t) {
    const Matrix q = random_pd(5, rng);
    const CertificateReport r = certify_quadratic(q, make_lasso(5, {1, 2}), {});
    CHECK(r.irrep_sup.lo <= r.irrep_sup.hi);
    if (r.irrepresentable == Verdict::Pass) {
      CHECK(r.tau == doctest::Approx(1.0 - r.irrep_sup.hi));
      CHECK(r.tau_bar > r.tau);
    }
    CHECK(r.kappa_A >= 0);
    CHECK(r.kappa_err >= 0);
    CHECK(r.kappa_err_star >= 0);
    CHECK(std::isinf(r.lambda_window.hi));
  }
}

TEST_CASE("dual certificate on a noiseless orthonormal design") {
  const int p = 4;
  const Matrix x = 2.0 * Matrix::Identity(p, p);  // X^T X / n = I with n = 4
  const Vector ts = vec({1.5, 0, -2, 0});
  const SquaredLoss loss(x, x * ts);
  const Penalty rho = make_lasso(p, {0, 2});
  const double lambda = 0.1;
  const EstimateResult rr = solve_restricted(loss, rho, lambda);
  const WitnessReport w = dual_certificate(loss, rho, lambda, rr.theta_hat);
  CHECK(w.certified_unique);
  CHECK(w.gauge_I_of_u_I <= 1e-9);
  CHECK(w.stationarity_residual <= 1e-7 * (1 + lambda));
  CHECK(w.theta_hat[0] == doctest::Approx(1.4));
}

TEST_CASE("dual certificate flags lambda below the window") {
  // Irrepresentable sup 0.5 and a noise direction that pushes the inactive
  // coordinate: with lambda far below the window the inactive dual exceeds 1.
  Matrix q(2, 2);
  q << 1, 0.5, 0.5, 1;
  const Matrix x = q.llt().matrixU().toDenseMatrix() * std::sqrt(2.0);
  const Vector ts = vec({1, 0});
  Vector y = x * ts;
  // y = X theta* + e with X^T e / n = (0, g).
  const Vector g = vec({0.0, 0.3});
  const Vector e = x * q.ldlt().solve(g);
  y += e;
  const SquaredLoss loss(x, y);
  const Penalty rho = make_lasso(2, {0});
  const double lambda = 0.01;
  const EstimateResult rr = solve_restricted(loss, rho, lambda);
  const WitnessReport w = dual_certificate(loss, rho, lambda, rr.theta_hat);
  CHECK_FALSE(w.certified_unique);
  CHECK(w.gauge_I_of_u_I > 1.0);
}

TEST_CASE("witness over seeded lasso instances stays below 1 - tau/2") {
  int counted = 0;
  for (std::uint64_t seed = 0; seed < 400 && counted < 100; ++seed) {
    LinearSpec spec;
    spec.p = 8;
    spec.s = 2;
    spec.n = 400;
    spec.sigma = 0.05;
    spec.covariance = Matrix::Identity(8, 8);
    const LinearDataset ds = gen_linear(spec, seed);
    const Penalty rho = make_lasso(8, ds.estimand.active);
    CertifyOptions co;
    co.theta_star = ds.theta_star;
    const CertificateReport r = certify(*ds.loss, rho, co);
    if (r.overall() != Verdict::Pass) continue;
    const double lambda = 1.5 * r.lambda_window.lo;
    if (!r.lambda_window.contains(lambda)) continue;
    const EstimateResult rr = solve_restricted(*ds.loss, rho, lambda);
    const WitnessReport w = dual_certificate(*ds.loss, rho, lambda, rr.theta_hat);
    CHECK(w.gauge_I_of_u_I <= 1.0 - r.tau / 2.0);
    ++counted;
  }
  CHECK(counted == 100);
}

TEST_CASE("converse examples") {
  const Penalty rho = make_lasso(2, {0});
  ConverseOptions opts;
  opts.trials = 0;
  const ConverseReport v = converse_check(rho, two_by_two(1, 1.2, 2), vec({1, 0}), opts);
  CHECK(v.violation == doctest::Approx(1.2));
  CHECK(v.applicable);
  const ConverseReport id = converse_check(rho, Matrix::Identity(2, 2), vec({1, 0}), opts);
  CHECK(id.violation == doctest::Approx(0.0));
  CHECK_FALSE(id.applicable);

  const Penalty gl = make_group_lasso(2, {{0, 1}}, {0});
  CHECK_THROWS_AS(converse_check(gl, Matrix::Identity(2, 2), vec({1, 1}), opts), UnsupportedError);
}

TEST_CASE("Wilson interval") {
  const Interval w = wilson_interval(50, 100);
  CHECK(w.lo == doctest::Approx(0.4038).epsilon(1e-3));
  CHECK(w.hi == doctest::Approx(0.5962).epsilon(1e-3));
  const Interval z = wilson_interval(0, 400);
  CHECK(z.lo == 0.0);
  CHECK(z.hi == doctest::Approx(3.8415 / (400 + 3.8415)).epsilon(1e-3));
}
