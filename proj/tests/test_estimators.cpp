#include <doctest.h>

#include <cmath>
#include <random>

#include "gdpen/certification.hpp"
#include "gdpen/datasets.hpp"
#include "gdpen/solver.hpp"
#include "oracles.hpp"

using namespace gdpen;
using oracle::randn;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(xs.size());
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

IndexSet all_of(int p) {
  IndexSet a(p);
  for (int i = 0; i < p; ++i) a[i] = i;
  return a;
}

Matrix random_design(int n, int p, std::mt19937_64& rng) {
  Matrix x(n, p);
  for (int c = 0; c < p; ++c) x.col(c) = randn(n, rng);
  return x;
}

Matrix random_covariance(int d, int n, std::mt19937_64& rng) {
  const Matrix z = random_design(n, d, rng);
  return z.transpose() * z / n;
}

}  // namespace

TEST_CASE("loss evaluation examples") {
  const SquaredLoss sq(Matrix::Identity(2, 2), vec({1, 2}));
  const LossEval e = loss_eval(sq, Vector::Zero(2), true);
  CHECK(e.value == doctest::Approx(1.25));
  CHECK(e.gradient[0] == doctest::Approx(-0.5));
  CHECK(e.gradient[1] == doctest::Approx(-1.0));
  REQUIRE(e.hessian);
  CHECK((*e.hessian - 0.5 * Matrix::Identity(2, 2)).norm() <= 1e-15);

  std::mt19937_64 rng(1);
  const Matrix s = random_covariance(3, 40, rng);
  const LogDetLoss ld(s, 40);
  CHECK(ld.gradient(ld.from_matrix(s.inverse())).norm() <= 1e-10);

  const Vector phi = vec({0.3, -1.0, 2.0});
  const ExpFamilyLoss gm(phi, gaussian_log_partition(), 10);
  const Vector th = vec({1, 1, 1});
  CHECK((gm.gradient(th) - (th - phi)).norm() <= 1e-14);
}

TEST_CASE("logdet outside the cone is a domain error") {
  const LogDetLoss ld(Matrix::Identity(2, 2), 10);
  Matrix bad(2, 2);
  bad << 1, 2, 2, 1;
  CHECK_THROWS_AS(ld.value(ld.from_matrix(bad)), DomainError);
  CHECK_FALSE(ld.in_domain(ld.from_matrix(bad)));
}

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(2);
  const Matrix x = random_design(30, 5, rng);
  const SquaredLoss sq(x, randn(30, rng));
  std::bernoulli_distribution coin(0.5);
  Vector counts(5), binary(5);
  for (int i = 0; i < 5; ++i) {
    counts[i] = 0.5 + i;
    binary[i] = coin(rng) ? 0.7 : 0.2;
  }
  const ExpFamilyLoss gauss(randn(5, rng), gaussian_log_partition(), 30);
  const ExpFamilyLoss bern(binary, bernoulli_log_partition(), 30);
  const ExpFamilyLoss pois(counts, poisson_log_partition(), 30);
  const LogDetLoss ld(random_covariance(4, 50, rng), 50);

  for (const Loss* loss : std::vector<const Loss*>{&sq, &gauss, &bern, &pois}) {
    for (int t = 0; t < 50; ++t) {
      const Vector th = randn(5, rng);
      const Vector fd = oracle::fd_gradient([&](const Vector& v) { return loss->value(v); }, th);
      CHECK(oracle::gradient_error(loss->gradient(th), fd) <= 1e-5);
    }
  }
  for (int t = 0; t < 50; ++t) {
    // Random PD points around the identity.
    const Matrix a = random_design(4, 4, rng) * 0.2;
    const Matrix theta = Matrix::Identity(4, 4) + a * a.transpose();
    const Vector th = ld.from_matrix(theta);
    const Vector fd = oracle::fd_gradient([&](const Vector& v) { return ld.value(v); }, th);
    CHECK(oracle::gradient_error(ld.gradient(th), fd) <= 1e-5);
  }
}

TEST_CASE("Hessians are symmetric and PSD") {
  std::mt19937_64 rng(3);
  const ExpFamilyLoss bern(Vector::Constant(4, 0.4), bernoulli_log_partition(), 10);
  const ExpFamilyLoss pois(Vector::Constant(4, 1.0), poisson_log_partition(), 10);
  const LogDetLoss ld(random_covariance(3, 30, rng), 30);
  for (int t = 0; t < 30; ++t) {
    const Vector th = randn(4, rng);
    for (const Loss* loss : std::vector<const Loss*>{&bern, &pois}) {
      const Matrix h = loss->hessian(th);
      CHECK((h - h.transpose()).norm() <= 1e-9);
      CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(h).eigenvalues().minCoeff() >= -1e-9);
    }
    const Matrix a = random_design(3, 3, rng) * 0.3;
    const Vector tl = ld.from_matrix(Matrix::Identity(3, 3) + a * a.transpose());
    const Matrix h = ld.hessian(tl);
    CHECK((h - h.transpose()).norm() <= 1e-9);
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(h).eigenvalues().minCoeff() >= -1e-9);
    // Hessian against differences of the gradient.
    const Vector dir = randn(6, rng);
    const double eps = 1e-6;
    const Vector fd = (ld.gradient(tl + eps * dir) - ld.gradient(tl - eps * dir)) / (2 * eps);
    CHECK((h * dir - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("solver examples") {
  // 0.5 (theta - 1)^2 as a squared loss with X = 1, y = 1, n = 1.
  const SquaredLoss one(Matrix::Ones(1, 1), Vector::Ones(1));
  const EstimateResult r = solve(one, make_lasso(1, {0}), 0.4);
  CHECK(r.converged);
  CHECK(r.theta_hat[0] == doctest::Approx(0.6).epsilon(1e-9));

  std::mt19937_64 rng(4);
  const Matrix x = random_design(40, 6, rng);
  const Vector y = randn(40, rng);
  const double lmax = (x.transpose() * y / 40.0).lpNorm<Eigen::Infinity>();
  const SquaredLoss sq(x, y);
  const EstimateResult z = solve(sq, make_lasso(6, all_of(6)), lmax * 1.0001);
  CHECK(z.theta_hat.norm() == 0.0);
  CHECK(z.support.empty());

  Matrix eye = Matrix::Identity(6, 6);
  const EstimateResult gl = solve(sq, make_analysis(eye, make_lasso(6, all_of(6))), 0.05);
  const EstimateResult la = solve(sq, make_lasso(6, all_of(6)), 0.05);
  CHECK(gl.converged);
  CHECK((gl.theta_hat - la.theta_hat).norm() <= 1e-6);
}

TEST_CASE("lasso solve matches sign-pattern enumeration") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ul(0.02, 0.4);
  for (int t = 0; t < 30; ++t) {
    const int p = 2 + t % 6;
    const int n = 30;
    const Matrix x = random_design(n, p, rng);
    const Vector y = x * randn(p, rng) + randn(n, rng);
    const double lambda = ul(rng);
    const Vector ref = *oracle::lasso_enumeration(x.transpose() * x / n, x.transpose() * y / n, lambda);
    const EstimateResult r = solve(SquaredLoss(x, y), make_lasso(p, all_of(p)), lambda);
    CHECK(r.converged);
    CHECK((r.theta_hat - ref).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
}

TEST_CASE("prox-gradient fixed point and monotone objective") {
  std::mt19937_64 rng(6);
  const Matrix x = random_design(50, 8, rng);
  const Vector y = randn(50, rng);
  const SquaredLoss sq(x, y);
  const Penalty gl = make_group_lasso(8, {{0, 1}, {2, 3, 4}, {5, 6, 7}}, {0, 1, 2});
  SolverOptions so;
  so.record_objective = true;
  const EstimateResult r = solve(sq, gl, 0.1, so);
  REQUIRE(r.converged);
  const double t = 0.3;
  const Vector fp = prox(gl, r.theta_hat - t * sq.gradient(r.theta_hat), t * 0.1);
  CHECK((fp - r.theta_hat).norm() <= 1e-7);
  for (size_t k = 1; k < r.objective_trace.size(); ++k)
    CHECK(r.objective_trace[k] <= r.objective_trace[k - 1] + 1e-12);
  CHECK(r.stationarity_residual <= 1e-8);
}

TEST_CASE("ADMM on a total-variation penalty reaches the optimum") {
  std::mt19937_64 rng(7);
  const int p = 6;
  const Matrix x = random_design(40, p, rng);
  const Vector y = randn(40, rng);
  const SquaredLoss sq(x, y);
  Matrix d = Matrix::Zero(p - 1, p);
  for (int i = 0; i + 1 < p; ++i) {
    d(i, i) = -1;
    d(i, i + 1) = 1;
  }
  const Penalty tv = make_analysis(d, make_lasso(p - 1, all_of(p - 1)));
  const double lambda = 0.1;
  const EstimateResult r = solve(sq, tv, lambda);
  CHECK(r.converged);
  auto obj = [&](const Vector& th) { return sq.value(th) + lambda * (d * th).lpNorm<1>(); };
  const double f = obj(r.theta_hat);
  for (int k = 0; k < 500; ++k) CHECK(f <= obj(r.theta_hat + 1e-3 * randn(p, rng)) + 1e-10);
}

TEST_CASE("restricted solves") {
  std::mt19937_64 rng(8);
  const int n = 40, p = 5;
  const Matrix x = random_design(n, p, rng);
  const Vector y = randn(n, rng);
  const SquaredLoss sq(x, y);

  // M = full space and A empty: unpenalized least squares.
  const Penalty none = make_custom(ConvexSet::origin(p), ConvexSet::origin(p), Subspace::full(p));
  const EstimateResult u = solve_restricted(sq, none, 0.1);
  const Vector ls = (x.transpose() * x).ldlt().solve(x.transpose() * y);
  CHECK((u.theta_hat - ls).norm() <= 1e-6);

  // Lasso restricted to A equals the lasso on the A-columns.
  const IndexSet a = {1, 3};
  const EstimateResult rr = solve_restricted(sq, make_lasso(p, a), 0.05);
  Matrix xa(n, 2);
  xa.col(0) = x.col(1);
  xa.col(1) = x.col(3);
  const EstimateResult sub = solve(SquaredLoss(xa, y), make_lasso(2, {0, 1}), 0.05);
  CHECK(rr.theta_hat[0] == 0.0);
  CHECK(rr.theta_hat[2] == 0.0);
  CHECK(rr.theta_hat[4] == 0.0);
  CHECK(std::abs(rr.theta_hat[1] - sub.theta_hat[0]) <= 1e-6);
  CHECK(std::abs(rr.theta_hat[3] - sub.theta_hat[1]) <= 1e-6);
}

TEST_CASE("noiseless orthonormal design: restricted error within the bound") {
  const int p = 4;
  const Matrix x = 2.0 * Matrix::Identity(p, p);
  const Vector ts = vec({1.0, -2.0, 0.0, 0.0});
  const SquaredLoss sq(x, x * ts);
  const Penalty rho = make_lasso(p, {0, 1});
  CertifyOptions co;
  co.theta_star = ts;
  const CertificateReport rep = certify(sq, rho, co);
  double prev = kInf;
  for (double lambda : {0.5, 0.1, 0.01, 0.001}) {
    const EstimateResult r = solve_restricted(sq, rho, lambda);
    const double err = (r.theta_hat - ts).norm();
    CHECK(err <= theorem_error_bound(rep, lambda) + 1e-9);
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev <= 1e-2);
}

TEST_CASE("grouped logdet solutions are exactly symmetric and PD") {
  BlockPrecisionSpec spec;
  spec.nodes = 4;
  spec.n = 400;
  const BlockPrecisionDataset ds = gen_block_precision(spec, 11);
  const Penalty gl = make_group_lasso(ds.loss->dim(), ds.groups, all_of(static_cast<int>(ds.groups.size())));
  const EstimateResult r = solve(*ds.loss, gl, 0.1);
  CHECK(r.converged);
  const Matrix th = ds.loss->to_matrix(r.theta_hat);
  CHECK((th - th.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(th).eigenvalues().minCoeff() > 1e-10);
}

TEST_CASE("exponential family fits stay in the compact subset") {
  // Gaussian mean model with sparse truth: ||theta_hat||_{2,1} <= 4 ||theta*||_{2,1}.
  std::mt19937_64 rng(12);
  const int p = 10;
  const std::vector<IndexSet> groups = {{0, 1}, {2, 3}, {4, 5}, {6, 7}, {8, 9}};
  Vector ts = Vector::Zero(p);
  ts[0] = 1.0;
  ts[1] = -1.0;
  auto norm21 = [&](const Vector& v) {
    double s = 0;
    for (const auto& g : groups) s += std::sqrt(v[g[0]] * v[g[0]] + v[g[1]] * v[g[1]]);
    return s;
  };
  int violations = 0;
  for (int t = 0; t < 50; ++t) {
    const int n = 200;
    Vector mean = Vector::Zero(p);
    for (int i = 0; i < n; ++i) mean += ts + randn(p, rng);
    mean /= n;
    const ExpFamilyLoss loss(mean, gaussian_log_partition(), n);
    const double lambda = 0.5 * std::sqrt(2 * std::log(5.0) / n);
    const EstimateResult r = solve(loss, make_group_lasso(p, groups, {0, 1, 2, 3, 4}), lambda);
    violations += norm21(r.theta_hat) > 4 * norm21(ts);
  }
  MESSAGE("compact-subset violations: " << violations << " / 50");
  CHECK(violations == 0);
}

TEST_CASE("support and KKT residual") {
  const SeparableStructure sep{{0, 1}, {}, {2}};
  const Vector th = vec({0.5, 0.0, 3.0});
  // grad = -(lambda sign, u, 0) with |u| <= lambda is stationary.
  CHECK(kkt_residual(sep, th, vec({-0.2, 0.1, 0.0}), 0.2) <= 1e-15);
  CHECK(kkt_residual(sep, th, vec({-0.2, 0.3, 0.0}), 0.2) == doctest::Approx(0.1));
  CHECK(support_of(make_lasso(3, {0, 1}), th, 1e-6) == IndexSet{0, 2});
}
