#include "gdpen/solver.hpp"

#include <algorithm>
#include <cmath>

#include "gdpen/lifted.hpp"

namespace gdpen {

namespace {

// Loss value with out-of-domain points mapped to +inf.
double safe_eval(const Loss& loss, const Vector& x, Vector* grad) {
  if (!loss.in_domain(x)) return kInf;
  try {
    return loss.eval(x, grad);
  } catch (const DomainError&) {
    return kInf;
  }
}

double separable_value(const SeparableStructure& sep, const Vector& x) {
  double r = 0.0;
  for (int i : sep.l1) r += std::abs(x[i]);
  for (const auto& g : sep.groups) {
    double sq = 0.0;
    for (int i : g) sq += x[i] * x[i];
    r += std::sqrt(sq);
  }
  return r;
}

EstimateResult solve_prox_gradient(const Loss& loss, const SeparableStructure& sep,
                                   double lambda, const SolverOptions& opts) {
  EstimateResult res;
  res.solver = loss.in_domain(Vector::Zero(loss.dim())) && loss.kind() != LossKind::LogDet
                   ? "fista"
                   : "prox-gradient-domain";
  Vector x = opts.init ? *opts.init : loss.initial_point();
  require_dim(x.size(), loss.dim(), "solve: init");
  if (!loss.in_domain(x)) throw DomainError("solve: initial point outside the loss domain");

  double fx = safe_eval(loss, x, nullptr);
  double big_f = fx + lambda * separable_value(sep, x);
  Vector y = x;
  double mom = 1.0;
  double lip = 1.0;
  bool restarted = true;
  Vector gy;
  Vector z;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    double fy = safe_eval(loss, y, &gy);
    if (!std::isfinite(fy)) {
      y = x;
      mom = 1.0;
      restarted = true;
      fy = safe_eval(loss, y, &gy);
    }
    double fz = kInf;
    for (int bt = 0; bt < 200; ++bt) {
      z = prox(sep, y - gy / lip, lambda / lip);
      fz = safe_eval(loss, z, nullptr);
      if (std::isfinite(fz)) {
        const Vector d = z - y;
        const double model = fy + gy.dot(d) + 0.5 * lip * d.squaredNorm();
        if (fz <= model + 1e-13 * (1.0 + std::abs(fy))) break;
      }
      lip *= 2.0;
    }
    if (!std::isfinite(fz)) throw DomainError("solve: line search could not stay in the domain");

    const double gmap = lip * (y - z).norm();
    const double big_fz = fz + lambda * separable_value(sep, z);
    const double mom_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * mom * mom));
    const bool plain = restarted;
    Vector x_next = big_fz <= big_f || plain ? z : x;
    restarted = false;
    if (big_fz <= big_f || plain) {
      y = x_next + (mom / mom_next) * (z - x_next) + ((mom - 1.0) / mom_next) * (x_next - x);
      mom = mom_next;
      x = std::move(x_next);
      big_f = big_fz;
    } else {
      y = x;
      mom = 1.0;
      restarted = true;
    }
    if (opts.record_objective) res.objective_trace.push_back(big_f);
    if (gmap <= opts.tol) {
      if (big_fz <= big_f + 1e-12 * (1.0 + std::abs(big_f))) {
        x = z;
        big_f = big_fz;
      }
      res.converged = true;
      ++it;
      break;
    }
    lip *= 0.95;
  }
  res.iterations = it;
  res.theta_hat = x;
  Vector g;
  const double f = loss.eval(x, &g);
  res.objective = f + lambda * separable_value(sep, x);
  res.stationarity_residual = kkt_residual(sep, x, g, lambda);
  return res;
}

struct AdmmPart {
  BasePart base;
  Matrix k;  // L_j^T B_S, d_j x k
};

EstimateResult solve_admm(const Loss& loss, const Penalty& rho, double lambda,
                          const SolverOptions& opts) {
  EstimateResult res;
  res.solver = "admm";
  const int p = rho.dim();
  const bool s_full = rho.S().is_full();
  const Matrix bs = s_full ? Matrix::Identity(p, p) : rho.S().basis();
  const int k = static_cast<int>(bs.cols());

  std::vector<AdmmPart> parts;
  for (const ConvexSet* set : {&rho.A(), &rho.I()}) {
    for (auto& part : lift(*set).parts) {
      if (part.dim() == 0) continue;
      AdmmPart ap;
      ap.k = part.map.transpose() * bs;
      ap.base = std::move(part);
      parts.push_back(std::move(ap));
    }
  }
  int total = 0;
  std::vector<int> offs;
  for (const auto& ap : parts) {
    offs.push_back(total);
    total += static_cast<int>(ap.k.rows());
  }
  Matrix kmat(total, k);
  for (size_t j = 0; j < parts.size(); ++j) kmat.middleRows(offs[j], parts[j].k.rows()) = parts[j].k;
  const Matrix ktk = kmat.transpose() * kmat;

  auto f_eval = [&](const Vector& w, Vector* grad) {
    const Vector th = s_full ? w : Vector(bs * w);
    if (!grad) return safe_eval(loss, th, nullptr);
    Vector g;
    const double v = safe_eval(loss, th, &g);
    if (std::isfinite(v)) *grad = s_full ? g : Vector(bs.transpose() * g);
    return v;
  };
  auto f_hess = [&](const Vector& w) {
    const Vector th = s_full ? w : Vector(bs * w);
    const Matrix h = loss.hessian(th);
    return s_full ? h : Matrix(bs.transpose() * h * bs);
  };

  Vector w;
  if (opts.init) {
    require_dim(opts.init->size(), p, "solve: init");
    w = s_full ? *opts.init : Vector(bs.transpose() * *opts.init);
  } else {
    const Vector t0 = loss.initial_point();
    w = s_full ? t0 : Vector(bs.transpose() * t0);
  }
  Vector z = kmat * w;
  Vector u = Vector::Zero(total);
  double step = 1.0;

  const bool quad = loss.quadratic();
  Matrix hq;
  Vector g0;
  if (quad) {
    hq = f_hess(Vector::Zero(k));
    f_eval(Vector::Zero(k), &g0);
  }
  Eigen::LDLT<Matrix> ldlt;
  auto factor = [&]() {
    if (quad) {
      Matrix sys = hq + step * ktk;
      sys.diagonal().array() += 1e-14 * (1.0 + sys.diagonal().cwiseAbs().maxCoeff());
      ldlt.compute(sys);
    }
  };
  factor();

  auto w_update = [&](const Vector& v) {
    if (quad) {
      w = ldlt.solve(Vector(-g0 + step * kmat.transpose() * v));
      return;
    }
    // Damped Newton on f(w) + step/2 ||K w - v||^2.
    for (int nt = 0; nt < 50; ++nt) {
      Vector g;
      const double fv = f_eval(w, &g);
      const Vector r = kmat * w - v;
      const double phi = fv + 0.5 * step * r.squaredNorm();
      const Vector grad = g + step * kmat.transpose() * r;
      if (grad.norm() <= 1e-13 * (1.0 + std::abs(phi))) break;
      Matrix h = f_hess(w) + step * ktk;
      h.diagonal().array() += 1e-14 * (1.0 + h.diagonal().cwiseAbs().maxCoeff());
      const Vector dir = -Eigen::LDLT<Matrix>(h).solve(grad);
      double a = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls, a *= 0.5) {
        const Vector wn = w + a * dir;
        const double fn = f_eval(wn, nullptr);
        if (!std::isfinite(fn)) continue;
        const Vector rn = kmat * wn - v;
        if (fn + 0.5 * step * rn.squaredNorm() <= phi + 1e-4 * a * grad.dot(dir)) {
          w = wn;
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
  };

  int it = 0;
  double r_norm = 0.0;
  double s_norm = 0.0;
  for (; it < opts.max_iter; ++it) {
    w_update(z - u);
    const Vector kw = kmat * w;
    const Vector z_old = z;
    const double t = lambda / step;
    for (size_t j = 0; j < parts.size(); ++j) {
      const int d = static_cast<int>(parts[j].k.rows());
      const Vector v = kw.segment(offs[j], d) + u.segment(offs[j], d);
      if (parts[j].base.kind == BaseKind::Whole) {
        z.segment(offs[j], d).setZero();
      } else {
        z.segment(offs[j], d) = v - base_project(parts[j].base, v, t);
      }
    }
    u += kw - z;
    r_norm = (kw - z).norm();
    s_norm = step * (kmat.transpose() * (z - z_old)).norm();
    const double eps_pri = opts.tol * std::sqrt(std::max(total, 1)) +
                           opts.tol * std::max(kw.norm(), z.norm());
    const double eps_dual = opts.tol * std::sqrt(std::max(k, 1)) +
                            opts.tol * step * (kmat.transpose() * u).norm();
    if (opts.record_objective) {
      const Vector th = s_full ? w : Vector(bs * w);
      res.objective_trace.push_back(f_eval(w, nullptr) + lambda * penalty_value(rho, th).value);
    }
    if (r_norm <= eps_pri && s_norm <= eps_dual) {
      res.converged = true;
      ++it;
      break;
    }
    if (it % 5 == 4) {
      if (r_norm > 10.0 * s_norm) {
        step *= 2.0;
        u /= 2.0;
        factor();
      } else if (s_norm > 10.0 * r_norm) {
        step /= 2.0;
        u *= 2.0;
        factor();
      }
    }
  }
  res.iterations = it;
  res.theta_hat = s_full ? w : Vector(bs * w);
  res.objective = loss.value(res.theta_hat) + lambda * penalty_value(rho, res.theta_hat).value;
  res.stationarity_residual = std::max(r_norm, s_norm);
  return res;
}

}  // namespace

double kkt_residual(const SeparableStructure& sep, const Vector& theta, const Vector& grad,
                    double lambda) {
  double sq = 0.0;
  for (int i : sep.l1) {
    const double r = theta[i] != 0.0 ? grad[i] + lambda * (theta[i] > 0 ? 1.0 : -1.0)
                                     : std::max(std::abs(grad[i]) - lambda, 0.0);
    sq += r * r;
  }
  for (const auto& g : sep.groups) {
    double nt = 0.0;
    double ng = 0.0;
    for (int i : g) {
      nt += theta[i] * theta[i];
      ng += grad[i] * grad[i];
    }
    nt = std::sqrt(nt);
    if (nt > 0.0) {
      for (int i : g) {
        const double r = grad[i] + lambda * theta[i] / nt;
        sq += r * r;
      }
    } else {
      const double r = std::max(std::sqrt(ng) - lambda, 0.0);
      sq += r * r;
    }
  }
  for (int i : sep.free) sq += grad[i] * grad[i];
  return std::sqrt(sq);
}

IndexSet support_of(const Penalty& rho, const Vector& theta, double eps) {
  IndexSet out;
  if (rho.kind() == PenaltyKind::GroupLasso && !rho.meta().groups.empty() &&
      rho.meta().expansion.size() == 0) {
    const auto& groups = rho.meta().groups;
    for (int g = 0; g < static_cast<int>(groups.size()); ++g) {
      double sq = 0.0;
      for (int i : groups[g]) sq += theta[i] * theta[i];
      if (std::sqrt(sq) > eps) out.push_back(g);
    }
    return out;
  }
  for (Eigen::Index i = 0; i < theta.size(); ++i)
    if (std::abs(theta[i]) > eps) out.push_back(static_cast<int>(i));
  return out;
}

EstimateResult solve(const Loss& loss, const Penalty& rho, double lambda,
                     const SolverOptions& opts) {
  require_dim(loss.dim(), rho.dim(), "solve: loss and penalty");
  if (!(lambda > 0.0)) throw Error("solve: lambda must be positive");
  EstimateResult res;
  if (const auto sep = separable_structure(rho)) {
    res = solve_prox_gradient(loss, *sep, lambda, opts);
  } else {
    res = solve_admm(loss, rho, lambda, opts);
  }
  res.support = support_of(rho, res.theta_hat, opts.eps_supp);
  return res;
}

EstimateResult solve_restricted(const Loss& loss, const Penalty& rho, double lambda,
                                const SolverOptions& opts) {
  require_dim(loss.dim(), rho.dim(), "solve_restricted: loss and penalty");
  if (!(lambda > 0.0)) throw Error("solve_restricted: lambda must be positive");
  const Matrix& b = rho.M().basis();
  const int k = rho.M().dim();
  EstimateResult res;
  if (k == 0) {
    res.theta_hat = Vector::Zero(rho.dim());
    res.objective = loss.value(res.theta_hat);
    res.converged = true;
    res.solver = "trivial";
    return res;
  }
  // Non-owning handle: the composed loss never outlives this call.
  const LossPtr base(&loss, [](const Loss*) {});
  const ComposedLoss reduced(base, b);
  const Penalty reduced_rho = make_custom(ConvexSet::linear_image(b.transpose(), rho.A()),
                                          ConvexSet::origin(k), Subspace::full(k));
  SolverOptions o = opts;
  if (opts.init) o.init = Vector(b.transpose() * *opts.init);
  res = solve(reduced, reduced_rho, lambda, o);
  res.theta_hat = b * res.theta_hat;
  res.objective = loss.value(res.theta_hat) + lambda * support_value(rho.A(), res.theta_hat).value;
  res.support = support_of(rho, res.theta_hat, opts.eps_supp);
  res.solver = "restricted-" + res.solver;
  return res;
}

}  // namespace gdpen
