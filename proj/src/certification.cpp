#include "gdpen/certification.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

#include "gdpen/datasets.hpp"
#include "gdpen/lifted.hpp"
#include "gdpen/parallel.hpp"

namespace gdpen {

const char* to_string(ErrorNorm norm) {
  switch (norm) {
    case ErrorNorm::Linf: return "linf";
    case ErrorNorm::L2: return "l2";
    case ErrorNorm::GroupLinf: return "group_linf";
  }
  return "linf";
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Indeterminate: return "indeterminate";
  }
  return "indeterminate";
}

namespace {

// Groups completed with singletons for uncovered coordinates.
std::vector<IndexSet> full_partition(int p, const std::vector<IndexSet>& groups) {
  std::vector<IndexSet> out = groups;
  std::vector<char> seen(p, 0);
  for (const auto& g : groups)
    for (int i : g) seen[i] = 1;
  for (int i = 0; i < p; ++i)
    if (!seen[i]) out.push_back({i});
  return out;
}

double block_norm(const Vector& x, const IndexSet& g) {
  double sq = 0.0;
  for (int i : g) sq += x[i] * x[i];
  return std::sqrt(sq);
}

Matrix rows_of(const Matrix& m, const IndexSet& rows) {
  Matrix out(rows.size(), m.cols());
  for (size_t r = 0; r < rows.size(); ++r) out.row(r) = m.row(rows[r]);
  return out;
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
}

void check_symmetric(const Matrix& q, int p, const char* what) {
  if (q.rows() != p || q.cols() != p) throw DimensionError(std::string(what) + ": Q has the wrong shape");
  const double scale = 1.0 + q.cwiseAbs().maxCoeff();
  if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw DomainError(std::string(what) + ": Q is not symmetric");
}

}  // namespace

double error_norm(ErrorNorm norm, const Vector& x, const std::vector<IndexSet>& groups) {
  switch (norm) {
    case ErrorNorm::Linf: return x.size() ? x.lpNorm<Eigen::Infinity>() : 0.0;
    case ErrorNorm::L2: return x.norm();
    case ErrorNorm::GroupLinf: {
      double m = 0.0;
      for (const auto& g : full_partition(static_cast<int>(x.size()), groups))
        m = std::max(m, block_norm(x, g));
      return m;
    }
  }
  return 0.0;
}

double dual_error_norm(ErrorNorm norm, const Vector& x, const std::vector<IndexSet>& groups) {
  switch (norm) {
    case ErrorNorm::Linf: return x.lpNorm<1>();
    case ErrorNorm::L2: return x.norm();
    case ErrorNorm::GroupLinf: {
      double s = 0.0;
      for (const auto& g : full_partition(static_cast<int>(x.size()), groups)) s += block_norm(x, g);
      return s;
    }
  }
  return 0.0;
}

std::vector<IndexSet> penalty_groups(const Penalty& rho) {
  if (rho.kind() == PenaltyKind::GroupLasso) return rho.meta().groups;
  return {};
}

ErrorNorm default_error_norm(const Penalty& rho) {
  return rho.kind() == PenaltyKind::GroupLasso ? ErrorNorm::GroupLinf : ErrorNorm::Linf;
}

// ------------------------------------------------------------------ V

namespace {

VResult v_from_gauge(const GaugeResult& g, const Vector& z) {
  VResult r;
  r.value = g.value;
  r.bracket = g.bracket;
  r.exact = g.exact;
  r.converged = g.converged;
  r.u_I = z;
  r.u_S_perp = Vector::Zero(z.size());
  return r;
}

// V(z) = min max_g ||u_g|| over u = z - N c with u = 0 off the I coordinates,
// N a basis of S-perp. Solved as a small second-order cone program with a
// log-barrier Newton method: min t s.t. ||a_g + B_g w|| <= t.
std::optional<VResult> v_group_subspace(const Penalty& rho, const Vector& z) {
  std::vector<IndexSet> units;
  if (const auto* box = std::get_if<CoordBox>(&rho.I().rep())) {
    for (int i : box->coords) units.push_back({i});
  } else if (const auto* ball = std::get_if<GroupBall>(&rho.I().rep())) {
    for (int g : ball->active) units.push_back(ball->groups[g]);
  } else {
    return std::nullopt;
  }
  const int p = rho.dim();
  std::vector<char> inside(p, 0);
  for (const auto& u : units)
    for (int i : u) inside[i] = 1;
  IndexSet out_idx;
  for (int i = 0; i < p; ++i)
    if (!inside[i]) out_idx.push_back(i);

  const Matrix n = rho.S().complement().basis();
  const int k = static_cast<int>(n.cols());
  VResult r;
  r.u_I = Vector::Zero(p);
  r.u_S_perp = Vector::Zero(p);
  const double zn = z.norm();
  if (zn == 0.0) {
    r.value = ExtReal::finite(0.0);
    r.bracket = {0.0, 0.0};
    return r;
  }

  // c = c0 + F w solves N_out c = z_out.
  Matrix n_out(out_idx.size(), k);
  Vector z_out(out_idx.size());
  for (size_t a = 0; a < out_idx.size(); ++a) {
    n_out.row(a) = n.row(out_idx[a]);
    z_out[a] = z[out_idx[a]];
  }
  Vector c0 = Vector::Zero(k);
  Matrix f = Matrix::Identity(k, k);
  if (!out_idx.empty()) {
    if (k > 0) {
      const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(n_out);
      c0 = cod.solve(z_out);
      f = Subspace::null_space(n_out, 1e-12).basis();
    }
    if ((n_out * c0 - z_out).norm() > 1e-10 * zn) {
      r.value = ExtReal::infinite();
      r.bracket = {kInf, kInf};
      return r;
    }
  }
  const Vector base = z - n * c0;  // u = base - (N F) w
  const Matrix nf = n * f;
  const int m = static_cast<int>(units.size());
  const int dw = static_cast<int>(f.cols());
  if (m == 0) {
    r.value = base.norm() <= 1e-10 * zn ? ExtReal::finite(0.0) : ExtReal::infinite();
    r.bracket = {r.value.unbounded ? kInf : 0.0, r.value.unbounded ? kInf : 0.0};
    r.u_S_perp = z;
    return r;
  }

  auto resid = [&](const Vector& w, int g) {
    Vector rg(units[g].size());
    for (size_t a = 0; a < units[g].size(); ++a) {
      const int i = units[g][a];
      rg[a] = base[i] - (dw > 0 ? nf.row(i).dot(w) : 0.0);
    }
    return rg;
  };
  auto jac = [&](int g) {
    Matrix bg(units[g].size(), dw);
    for (size_t a = 0; a < units[g].size(); ++a) bg.row(a) = -nf.row(units[g][a]);
    return bg;
  };
  std::vector<Matrix> jacs;
  for (int g = 0; g < m; ++g) jacs.push_back(jac(g));

  auto max_norm = [&](const Vector& w) {
    double v = 0.0;
    for (int g = 0; g < m; ++g) v = std::max(v, resid(w, g).norm());
    return v;
  };
  // x = (w, t); phi = s t - sum_g log(t^2 - ||r_g||^2)
  Vector x = Vector::Zero(dw + 1);
  x[dw] = 1.5 * max_norm(x.head(dw)) + 1e-3 * zn;
  auto phi = [&](const Vector& y, double sc) {
    double v = sc * y[dw];
    for (int g = 0; g < m; ++g) {
      const double d = y[dw] * y[dw] - resid(y.head(dw), g).squaredNorm();
      if (!(d > 0.0) || y[dw] <= 0.0) return kInf;
      v -= std::log(d);
    }
    return v;
  };
  double sc = 2.0 * m / x[dw];
  bool ok = true;
  for (int outer = 0; outer < 200; ++outer) {
    for (int it = 0; it < 100; ++it) {
      Vector grad = Vector::Zero(dw + 1);
      Matrix hess = Matrix::Zero(dw + 1, dw + 1);
      grad[dw] = sc;
      for (int g = 0; g < m; ++g) {
        const Vector rg = resid(x.head(dw), g);
        const double t = x[dw];
        const double d = t * t - rg.squaredNorm();
        Vector dd(dw + 1);
        dd.head(dw) = -2.0 * jacs[g].transpose() * rg;
        dd[dw] = 2.0 * t;
        Matrix d2 = Matrix::Zero(dw + 1, dw + 1);
        d2.topLeftCorner(dw, dw) = -2.0 * jacs[g].transpose() * jacs[g];
        d2(dw, dw) = 2.0;
        grad -= dd / d;
        hess += dd * dd.transpose() / (d * d) - d2 / d;
      }
      const Vector step = -hess.ldlt().solve(grad);
      const double dec = -grad.dot(step);
      if (!(dec > 2e-16)) break;
      double a = 1.0;
      const double f0 = phi(x, sc);
      while (a > 1e-20 && !(phi(x + a * step, sc) <= f0 - 0.25 * a * dec)) a *= 0.5;
      if (a <= 1e-20) break;
      x += a * step;
      if (dec < 1e-18) break;
    }
    if (2.0 * m / sc <= 1e-13 * x[dw]) break;
    sc *= 8.0;
    if (outer == 199) ok = false;
  }
  const Vector w = x.head(dw);
  const double val = max_norm(w);
  const double gap = 2.0 * m / sc;
  r.value = ExtReal::finite(val);
  r.bracket = {std::max(0.0, val - gap), val};
  r.converged = ok;
  r.exact = false;
  r.u_I = base - (dw > 0 ? Vector(nf * w) : Vector::Zero(p));
  for (int i : out_idx) r.u_I[i] = 0.0;
  r.u_S_perp = z - r.u_I;
  return r;
}

}  // namespace

VResult V_value_generic(const Penalty& rho, const Vector& z) {
  require_dim(z.size(), rho.dim(), "V_value");
  const int p = rho.dim();
  std::vector<BasePart> parts;
  for (auto& part : lift(rho.I()).parts)
    if (part.dim() > 0) parts.push_back(std::move(part));
  const int n_i = static_cast<int>(parts.size());
  const Subspace s_perp = rho.S().complement();
  if (s_perp.dim() > 0) {
    BasePart whole;
    whole.kind = BaseKind::Whole;
    whole.map = s_perp.basis();
    parts.push_back(std::move(whole));
  }
  VResult r;
  r.u_I = Vector::Zero(p);
  r.u_S_perp = Vector::Zero(p);
  if (z.isZero(0.0)) {
    r.value = ExtReal::finite(0.0);
    r.bracket = {0.0, 0.0};
    return r;
  }
  if (parts.empty()) {
    r.value = ExtReal::infinite();
    r.bracket = {kInf, kInf};
    return r;
  }
  const FeasibilitySolver solver(parts, Matrix::Identity(p, p));
  const ScaledGauge g = scaled_gauge(solver, z);
  r.value = g.value;
  r.bracket = g.bracket;
  r.converged = g.converged;
  r.exact = g.converged;
  if (!g.value.unbounded && g.blocks.size() == parts.size()) {
    for (int j = 0; j < n_i; ++j) r.u_I += parts[j].map * g.blocks[j];
    r.u_S_perp = z - r.u_I;
  }
  return r;
}

VResult V_value(const Penalty& rho, const Vector& z) {
  require_dim(z.size(), rho.dim(), "V_value");
  if (rho.S().is_full()) return v_from_gauge(gauge_value(rho.I(), z), z);
  if (auto r = v_group_subspace(rho, z)) return *r;
  return V_value_generic(rho, z);
}

namespace {

/// V with a subgradient; closed forms when S = R^p and I is a coordinate box
/// or a group ball.
class VOracle {
 public:
  explicit VOracle(const Penalty& rho) : p_(rho.dim()) {
    if (!rho.S().is_full()) {
      make_generic(rho);
      return;
    }
    if (const auto* box = std::get_if<CoordBox>(&rho.I().rep())) {
      mode_ = Mode::Box;
      for (int i : box->coords) units_.push_back({i});
    } else if (const auto* ball = std::get_if<GroupBall>(&rho.I().rep())) {
      mode_ = Mode::Group;
      for (int g : ball->active) units_.push_back(ball->groups[g]);
    }
    if (mode_ == Mode::Generic) {
      make_generic(rho);
      return;
    }
    inside_.assign(p_, 0);
    for (const auto& u : units_)
      for (int i : u) inside_[i] = 1;
  }

  bool closed_form() const { return mode_ != Mode::Generic; }
  bool box() const { return mode_ == Mode::Box; }
  const std::vector<IndexSet>& units() const { return units_; }

  double value(const Vector& u) const {
    if (!closed_form()) {
      if (!solver_) return u.isZero(0.0) ? 0.0 : kInf;
      const ScaledGauge g = scaled_gauge(*solver_, u);
      return g.value.unbounded ? kInf : g.bracket.hi;
    }
    const double off_tol = 1e-10 * std::max(1.0, u.lpNorm<Eigen::Infinity>());
    for (int i = 0; i < p_; ++i)
      if (!inside_[i] && std::abs(u[i]) > off_tol) return kInf;
    double m = 0.0;
    for (const auto& g : units_) m = std::max(m, block_norm(u, g));
    return m;
  }

  /// Lower bound on V together with x such that V(w) >= x^T w for all w.
  double lower(const Vector& u, Vector& x) const {
    x = Vector::Zero(p_);
    if (!closed_form()) {
      if (!solver_) return u.isZero(0.0) ? 0.0 : kInf;
      const ScaledGauge g = scaled_gauge(*solver_, u);
      if (g.value.unbounded) return kInf;
      // The bisection's dual certificate is a subgradient-type lower bound.
      if (g.dual.size() == p_) x = g.dual;
      return g.bracket.lo;
    }
    double best = -1.0;
    const IndexSet* arg = nullptr;
    for (const auto& g : units_) {
      const double v = block_norm(u, g);
      if (v > best) {
        best = v;
        arg = &g;
      }
    }
    if (arg && best > 0.0)
      for (int i : *arg) x[i] = u[i] / best;
    return std::max(best, 0.0);
  }

 private:
  void make_generic(const Penalty& rho) {
    mode_ = Mode::Generic;
    std::vector<BasePart> parts;
    for (auto& part : lift(rho.I()).parts)
      if (part.dim() > 0) parts.push_back(std::move(part));
    const Subspace s_perp = rho.S().complement();
    if (s_perp.dim() > 0) {
      BasePart whole;
      whole.kind = BaseKind::Whole;
      whole.map = s_perp.basis();
      parts.push_back(std::move(whole));
    }
    if (!parts.empty()) solver_.emplace(std::move(parts), Matrix::Identity(p_, p_));
  }

  enum class Mode { Box, Group, Generic };
  int p_;
  std::optional<FeasibilitySolver> solver_;
  Mode mode_ = Mode::Generic;
  std::vector<IndexSet> units_;
  std::vector<char> inside_;
};

Vector lifted_lmo(const LiftedSet& set, const Vector& g) {
  Vector out = Vector::Zero(set.ambient);
  for (const auto& part : set.parts) {
    if (part.dim() == 0) continue;
    out += part.map * base_lmo(part, part.map.transpose() * g);
  }
  return out;
}

/// Candidate extreme points of a polyhedral lifted set, or nothing when the
/// product of vertex counts exceeds `cap`.
std::optional<std::vector<Vector>> polytope_vertices(const LiftedSet& set, std::size_t cap) {
  std::vector<std::vector<Vector>> per_part;
  double count = 1.0;
  for (const auto& part : set.parts) {
    if (part.dim() == 0) continue;
    std::vector<Vector> verts;
    if (part.kind == BaseKind::Simplex) {
      for (int i = 0; i < part.dim(); ++i) verts.push_back(part.map.col(i));
    } else if (part.kind == BaseKind::Box) {
      if (part.dim() > 20) return std::nullopt;
      const std::size_t m = std::size_t{1} << part.dim();
      if (static_cast<double>(m) * count > static_cast<double>(cap)) return std::nullopt;
      for (std::size_t mask = 0; mask < m; ++mask) {
        Vector y(part.dim());
        for (int i = 0; i < part.dim(); ++i) y[i] = (mask >> i) & 1 ? 1.0 : -1.0;
        verts.push_back(part.map * y);
      }
    } else {
      return std::nullopt;
    }
    count *= static_cast<double>(verts.size());
    if (count > static_cast<double>(cap)) return std::nullopt;
    per_part.push_back(std::move(verts));
  }
  std::vector<Vector> out{Vector::Zero(set.ambient)};
  for (const auto& verts : per_part) {
    std::vector<Vector> next;
    next.reserve(out.size() * verts.size());
    for (const auto& a : out)
      for (const auto& v : verts) next.push_back(a + v);
    out = std::move(next);
  }
  return out;
}

constexpr std::size_t kVertexCap = std::size_t{1} << 16;

struct Bounds {
  double lb = 0.0;
  double ub = kInf;
};

/// sup_{z in A} V(K z) by ascent (lower bound) and the triangle inequality
/// over the lifted parts of A (upper bound).
Bounds ascent_bounds(const VOracle& v, const Matrix& k, const LiftedSet& a, int restarts,
                     std::uint64_t seed) {
  Bounds b;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  const int p = static_cast<int>(k.rows());
  for (int r = 0; r < restarts; ++r) {
    Vector dir(p);
    for (int i = 0; i < p; ++i) dir[i] = nd(rng);
    Vector z = lifted_lmo(a, k.transpose() * dir);
    Vector x;
    double cur = v.lower(k * z, x);
    for (int it = 0; it < 200 && std::isfinite(cur); ++it) {
      const Vector zn = lifted_lmo(a, k.transpose() * x);
      Vector xn;
      const double val = v.lower(k * zn, xn);
      if (!(val > cur + 1e-13 * (1.0 + cur))) break;
      cur = val;
      z = zn;
      x = xn;
    }
    b.lb = std::max(b.lb, cur);
  }

  // Upper bound.
  if (v.closed_form() && !v.box()) {
    // V(Kz) = max_g ||sum_h K_gh z_h||, bounded per inactive group by the sum
    // over A's ball blocks of spectral norms.
    double ub = 0.0;
    for (const auto& g : v.units()) {
      const Matrix kg = rows_of(k, g);
      double s = 0.0;
      for (const auto& part : a.parts) {
        if (part.dim() == 0) continue;
        const Matrix m = kg * part.map;
        if (part.kind == BaseKind::BallProduct) {
          for (const auto& grp : part.groups) {
            Matrix cols(m.rows(), grp.size());
            for (size_t c = 0; c < grp.size(); ++c) cols.col(c) = m.col(grp[c]);
            s += spectral_norm(cols);
          }
        } else if (part.kind == BaseKind::Box) {
          for (int c = 0; c < m.cols(); ++c) s += m.col(c).norm();
        } else {
          double mx = 0.0;
          for (int c = 0; c < m.cols(); ++c) mx = std::max(mx, m.col(c).norm());
          s += mx;
        }
      }
      ub = std::max(ub, s);
    }
    b.ub = ub;
  } else {
    double ub = 0.0;
    for (const auto& part : a.parts) {
      if (part.dim() == 0) continue;
      const Matrix m = k * part.map;
      std::vector<double> vb(part.dim());
      for (int c = 0; c < part.dim(); ++c)
        vb[c] = std::max(v.value(m.col(c)), v.value(-m.col(c)));
      if (part.kind == BaseKind::Box) {
        for (double x : vb) ub += x;
      } else if (part.kind == BaseKind::BallProduct) {
        for (const auto& grp : part.groups) {
          double sq = 0.0;
          for (int c : grp) sq += vb[c] * vb[c];
          ub += std::sqrt(sq);
        }
      } else {
        ub += *std::max_element(vb.begin(), vb.end());
      }
    }
    b.ub = ub;
  }
  b.ub = std::max(b.ub, b.lb);
  return b;
}

}  // namespace

// ------------------------------------------------------------------ irrep

IrrepMap irrep_map(const Penalty& rho, const Matrix& q) {
  const int p = rho.dim();
  check_symmetric(q, p, "irrep_map");
  IrrepMap out;
  out.inverse = restricted_inverse(q, rho.M());
  if (out.inverse.not_psd)
    throw RankDeficiencyError("irrep_map: Q is not positive semidefinite on M");
  if (out.inverse.rank < rho.M().dim())
    throw RankDeficiencyError("irrep_map: Q is singular on the model subspace");
  const Matrix& b = out.inverse.basis;
  const Matrix p_perp = Matrix::Identity(p, p) - b * b.transpose();
  out.K = p_perp * (q * b * out.inverse.inv * b.transpose() - Matrix::Identity(p, p));
  return out;
}

namespace {

Verdict verdict_of(const Interval& sup) {
  if (sup.hi < 1.0) return Verdict::Pass;
  if (sup.lo >= 1.0) return Verdict::Fail;
  return Verdict::Indeterminate;
}

bool lasso_closed_form(const Penalty& rho) {
  return rho.kind() == PenaltyKind::Lasso && rho.S().is_full();
}

}  // namespace

IrrepResult irrep_check(const Penalty& rho, const Matrix& q, std::uint64_t seed) {
  const IrrepMap map = irrep_map(rho, q);
  const Matrix& k = map.K;
  IrrepResult res;

  if (lasso_closed_form(rho)) {
    double sup = 0.0;
    for (int i : rho.meta().inactive) {
      double s = 0.0;
      for (int j : rho.meta().active) s += std::abs(k(i, j));
      sup = std::max(sup, s);
    }
    res.sup = {sup, sup};
    res.method = "lasso-closed-form";
    res.exact = true;
  } else {
    const VOracle v(rho);
    const LiftedSet a = lift(rho.A());
    if (a.polyhedral()) {
      if (auto verts = polytope_vertices(a, kVertexCap)) {
        double lo = 0.0;
        double hi = 0.0;
        bool exact = true;
        for (const auto& z : *verts) {
          const Vector kz = k * z;
          if (v.closed_form()) {
            const double val = v.value(kz);
            lo = std::max(lo, val);
            hi = std::max(hi, val);
          } else {
            const VResult r = V_value(rho, kz);
            exact = exact && r.exact;
            lo = std::max(lo, r.value.unbounded ? kInf : r.bracket.lo);
            hi = std::max(hi, r.value.unbounded ? kInf : r.bracket.hi);
          }
        }
        res.sup = {lo, hi};
        res.method = "atoms";
        res.exact = exact;
      }
    }
    if (res.method.empty()) {
      const Bounds b = ascent_bounds(v, k, a, 20, seed);
      res.sup = {b.lb, b.ub};
      res.method = "ascent";
      res.exact = b.ub - b.lb <= 1e-12 * (1.0 + b.ub);
    }
  }
  res.verdict = verdict_of(res.sup);
  res.tau = res.verdict == Verdict::Pass ? 1.0 - res.sup.hi : 0.0;
  return res;
}

// ------------------------------------------------------------------ compatibility

namespace {

/// sup of the dual error norm over the unit l2 ball of M (basis b).
Bounds dual_norm_sup(ErrorNorm norm, const Matrix& b, const std::vector<IndexSet>& groups,
                     std::uint64_t seed) {
  const int p = static_cast<int>(b.rows());
  const int k = static_cast<int>(b.cols());
  Bounds out;
  if (norm == ErrorNorm::L2) {
    out.lb = out.ub = 1.0;
    return out;
  }
  const auto parts = full_partition(p, norm == ErrorNorm::GroupLinf ? groups : std::vector<IndexSet>{});
  int touched = 0;
  for (const auto& g : parts) {
    double sq = 0.0;
    for (int i : g) sq += b.row(i).squaredNorm();
    if (sq > 1e-24) ++touched;
  }
  out.ub = std::sqrt(static_cast<double>(touched));

  // sup_w ||b w||_dual = sup over unit blocks s of ||b^T s||; alternate the two.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int r = 0; r < 50; ++r) {
    Vector w(k);
    for (int i = 0; i < k; ++i) w[i] = nd(rng);
    w.normalize();
    double cur = 0.0;
    for (int it = 0; it < 500; ++it) {
      const Vector x = b * w;
      Vector s = Vector::Zero(p);
      for (const auto& g : parts) {
        const double n = block_norm(x, g);
        if (n > 0.0)
          for (int i : g) s[i] = x[i] / n;
      }
      const Vector bs = b.transpose() * s;
      const double val = bs.norm();
      if (!(val > cur + 1e-14 * (1.0 + cur)) || val == 0.0) {
        cur = std::max(cur, val);
        break;
      }
      cur = val;
      w = bs / val;
    }
    out.lb = std::max(out.lb, cur);
  }
  out.lb = std::min(out.lb, out.ub);
  return out;
}

/// sup_{a in A} ||P_M a||.
Bounds kappa_a_bounds(const Penalty& rho, const Matrix& b, std::uint64_t seed) {
  Bounds out;
  const LiftedSet a = lift(rho.A());
  // Closed form: every generator of A lies in M, so ||P_M a|| = ||a||.
  bool in_m = true;
  for (const auto& part : a.parts)
    if ((part.map - b * (b.transpose() * part.map)).cwiseAbs().maxCoeff() > 1e-12) in_m = false;
  if (in_m && rho.S().is_full()) {
    if (const auto* box = std::get_if<CoordBox>(&rho.A().rep())) {
      out.lb = out.ub = std::sqrt(static_cast<double>(box->coords.size()));
      return out;
    }
    if (const auto* ball = std::get_if<GroupBall>(&rho.A().rep())) {
      out.lb = out.ub = std::sqrt(static_cast<double>(ball->active.size()));
      return out;
    }
  }
  if (a.polyhedral()) {
    if (auto verts = polytope_vertices(a, kVertexCap)) {
      double m = 0.0;
      for (const auto& v : *verts) m = std::max(m, (b.transpose() * v).norm());
      out.lb = out.ub = m;
      return out;
    }
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  const int p = rho.dim();
  for (int r = 0; r < 50; ++r) {
    Vector dir(p);
    for (int i = 0; i < p; ++i) dir[i] = nd(rng);
    Vector z = lifted_lmo(a, b * (b.transpose() * dir));
    double cur = (b.transpose() * z).norm();
    for (int it = 0; it < 200; ++it) {
      const Vector zn = lifted_lmo(a, b * (b.transpose() * z));
      const double val = (b.transpose() * zn).norm();
      if (!(val > cur + 1e-13 * (1.0 + cur))) break;
      cur = val;
      z = zn;
    }
    out.lb = std::max(out.lb, cur);
  }
  double ub = 0.0;
  for (const auto& part : a.parts) {
    if (part.dim() == 0) continue;
    const Matrix m = b.transpose() * part.map;
    if (part.kind == BaseKind::Box) {
      for (int c = 0; c < m.cols(); ++c) ub += m.col(c).norm();
    } else if (part.kind == BaseKind::BallProduct) {
      for (const auto& grp : part.groups) {
        Matrix cols(m.rows(), grp.size());
        for (size_t c = 0; c < grp.size(); ++c) cols.col(c) = m.col(grp[c]);
        ub += spectral_norm(cols);
      }
    } else {
      double mx = 0.0;
      for (int c = 0; c < m.cols(); ++c) mx = std::max(mx, m.col(c).norm());
      ub += mx;
    }
  }
  out.ub = std::max(ub, out.lb);
  return out;
}

/// sup over the error-norm unit ball (optionally restricted to coordinates
/// `allowed`) of V(K x).
Bounds tau_bar_bounds(const VOracle& v, const Matrix& k, ErrorNorm norm,
                      const std::vector<IndexSet>& groups, const std::vector<char>* allowed,
                      std::uint64_t seed) {
  const int p = static_cast<int>(k.rows());
  auto parts = full_partition(p, norm == ErrorNorm::GroupLinf ? groups : std::vector<IndexSet>{});
  Matrix km = k;
  if (allowed)
    for (int j = 0; j < p; ++j)
      if (!(*allowed)[j]) km.col(j).setZero();
  Bounds out;

  if (v.closed_form() && v.box()) {
    // V(K x) = max_i |k_i^T x|: the sup is the largest dual norm of a row.
    double m = 0.0;
    for (const auto& u : v.units()) m = std::max(m, dual_error_norm(norm, km.row(u[0]).transpose(), groups));
    out.lb = out.ub = m;
    return out;
  }
  if (v.closed_form() && norm == ErrorNorm::L2) {
    double m = 0.0;
    for (const auto& g : v.units()) m = std::max(m, spectral_norm(rows_of(km, g)));
    out.lb = out.ub = m;
    return out;
  }

  // Ascent over the error ball: x <- argmax_{||x|| <= 1} (K^T s)^T x.
  auto ball_lmo = [&](const Vector& g) {
    Vector x = Vector::Zero(p);
    if (norm == ErrorNorm::L2) {
      const double n = g.norm();
      if (n > 0.0) x = g / n;
      return x;
    }
    for (const auto& grp : parts) {
      const double n = block_norm(g, grp);
      if (n > 0.0)
        for (int i : grp) x[i] = g[i] / n;
    }
    return x;
  };
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int r = 0; r < 50; ++r) {
    Vector dir(p);
    for (int i = 0; i < p; ++i) dir[i] = nd(rng);
    Vector x = ball_lmo(km.transpose() * dir);
    Vector s;
    double cur = v.lower(km * x, s);
    for (int it = 0; it < 200 && std::isfinite(cur); ++it) {
      const Vector xn = ball_lmo(km.transpose() * s);
      Vector sn;
      const double val = v.lower(km * xn, sn);
      if (!(val > cur + 1e-13 * (1.0 + cur))) break;
      cur = val;
      x = xn;
      s = sn;
    }
    out.lb = std::max(out.lb, cur);
  }

  double ub = 0.0;
  if (v.closed_form()) {
    // Group V: max_g sup ||K_g x|| <= max_g sum_h sigma_max(K_{g,h}).
    for (const auto& g : v.units()) {
      const Matrix kg = rows_of(km, g);
      double s = 0.0;
      for (const auto& h : parts) {
        Matrix cols(kg.rows(), h.size());
        for (size_t c = 0; c < h.size(); ++c) cols.col(c) = kg.col(h[c]);
        s += spectral_norm(cols);
      }
      ub = std::max(ub, s);
    }
  } else {
    std::vector<double> vb(p);
    for (int j = 0; j < p; ++j) vb[j] = std::max(v.value(km.col(j)), v.value(-km.col(j)));
    if (norm == ErrorNorm::L2) {
      double sq = 0.0;
      for (double x : vb) sq += x * x;
      ub = std::sqrt(sq);
    } else {
      for (const auto& grp : parts) {
        double sq = 0.0;
        for (int j : grp) sq += vb[j] * vb[j];
        ub += std::sqrt(sq);
      }
    }
  }
  out.ub = std::max(ub, out.lb);
  return out;
}

double factored(const Bounds& b, double factor, bool& exact) {
  if (b.ub - b.lb <= 1e-12 * (1.0 + b.ub)) return b.ub;
  exact = false;
  return std::min(factor * b.lb, b.ub);
}

}  // namespace

Compatibility compatibility_constants(const Penalty& rho, ErrorNorm norm, const Matrix& q,
                                      std::uint64_t seed) {
  Compatibility c;
  const Subspace& m = rho.M();
  if (m.dim() == 0) return c;
  const Matrix& b = m.basis();
  const int p = rho.dim();
  const auto groups = penalty_groups(rho);
  const auto parts = full_partition(p, norm == ErrorNorm::GroupLinf ? groups : std::vector<IndexSet>{});
  constexpr double kSafety = 1.1;

  switch (norm) {
    case ErrorNorm::Linf:
      for (int i = 0; i < p; ++i) c.kappa_err = std::max(c.kappa_err, b.row(i).norm());
      break;
    case ErrorNorm::L2:
      c.kappa_err = 1.0;
      break;
    case ErrorNorm::GroupLinf:
      for (const auto& g : parts) c.kappa_err = std::max(c.kappa_err, spectral_norm(rows_of(b, g)));
      break;
  }

  bool exact = true;
  c.kappa_err_star = factored(dual_norm_sup(norm, b, groups, mix64(seed ^ 0x11)), kSafety, exact);
  c.kappa_A = factored(kappa_a_bounds(rho, b, mix64(seed ^ 0x22)), kSafety, exact);

  const IrrepMap map = irrep_map(rho, q);
  const VOracle v(rho);
  c.tau_bar = factored(tau_bar_bounds(v, map.K, norm, groups, nullptr, mix64(seed ^ 0x33)),
                       kSafety, exact);
  if (const auto coords = m.coordinate_support()) {
    std::vector<char> allowed(p, 0);
    for (int i : *coords) allowed[i] = 1;
    bool ex = true;
    c.tau_bar_restricted =
        factored(tau_bar_bounds(v, map.K, norm, groups, &allowed, mix64(seed ^ 0x44)), kSafety, ex);
    exact = exact && ex;
  }
  c.exact = exact;
  c.safety_factor = exact ? 1.0 : kSafety;
  return c;
}

// ------------------------------------------------------------------ smoothness

namespace {

double sym_spectral_norm(const Matrix& m) {
  if (m.rows() == 0) return 0.0;
  if (m.rows() <= 400)
    return Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::EigenvaluesOnly).eigenvalues().cwiseAbs().maxCoeff();
  Vector x = Vector::Ones(m.rows()).normalized();
  double val = 0.0;
  for (int it = 0; it < 100; ++it) {
    const Vector y = m * x;
    const double n = y.norm();
    if (n == 0.0) return 0.0;
    val = n;
    x = y / n;
  }
  return val;
}

Vector ball_sample(const Matrix& b, double radius, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  const int k = static_cast<int>(b.cols());
  Vector w(k);
  for (int i = 0; i < k; ++i) w[i] = nd(rng);
  const double n = w.norm();
  if (n == 0.0) return Vector::Zero(b.rows());
  const double r = radius * std::pow(ud(rng), 1.0 / k);
  return b * (w * (r / n));
}

}  // namespace

Smoothness smoothness_constants(const Loss& loss, const Penalty& rho, const Vector& theta_star,
                                double radius, std::uint64_t seed) {
  require_dim(theta_star.size(), rho.dim(), "smoothness_constants");
  Smoothness s;
  const Matrix& b = rho.M().basis();
  if (rho.M().dim() == 0) return s;
  auto restricted_min = [&](const Vector& th) {
    const Matrix h = b.transpose() * loss.hessian(th) * b;
    return Eigen::SelfAdjointEigenSolver<Matrix>(h, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  };
  s.m_C = restricted_min(theta_star);
  if (loss.quadratic()) return s;

  s.estimated = true;
  std::mt19937_64 rng(seed);
  int taken = 0;
  for (int attempt = 0; attempt < 500 && taken < 25; ++attempt) {
    const Vector th = theta_star + ball_sample(b, radius, rng);
    if (!loss.in_domain(th)) continue;
    s.m_C = std::min(s.m_C, restricted_min(th));
    ++taken;
  }
  taken = 0;
  for (int attempt = 0; attempt < 1000 && taken < 50; ++attempt) {
    const Vector t1 = theta_star + ball_sample(b, radius, rng);
    const Vector t2 = theta_star + ball_sample(b, radius, rng);
    const double d = (t1 - t2).norm();
    if (d == 0.0 || !loss.in_domain(t1) || !loss.in_domain(t2)) continue;
    s.L_C = std::max(s.L_C, sym_spectral_norm(loss.hessian(t1) - loss.hessian(t2)) / d);
    ++taken;
  }
  return s;
}

// ------------------------------------------------------------------ window

LambdaWindow lambda_window(const CertificateReport& r, double grad_norm) {
  LambdaWindow w;
  if (r.tau_bar > 0.0) {
    w.lo = r.tau > 0.0 ? 2.0 * r.tau_bar / r.tau * grad_norm : kInf;
  } else {
    w.lo = 0.0;
    w.degenerate = grad_norm > 0.0;
  }
  if (r.L_C == 0.0) {
    w.hi = kInf;
  } else {
    // (m^2/L) tau / (k_err (2 k_A + (tau/tau_bar) k_err*)^2 tau_bar), multiplied
    // through by tau_bar^2 so tau_bar = 0 needs no division.
    const double inner = 2.0 * r.kappa_A * r.tau_bar + r.tau * r.kappa_err_star;
    const double den = r.L_C * r.kappa_err * inner * inner;
    w.hi = den > 0.0 ? r.m_C * r.m_C * r.tau * r.tau_bar / den : kInf;
  }
  w.empty = !(r.tau > 0.0) || !(w.lo < w.hi);
  return w;
}

double CertificateReport::error_bound_coefficient() const {
  if (!(m_C > 0.0)) return kInf;
  if (tau_bar > 0.0) return 2.0 * (kappa_A + tau / (2.0 * tau_bar) * kappa_err_star) / m_C;
  return kappa_err_star == 0.0 ? 2.0 * kappa_A / m_C : kInf;
}

Verdict CertificateReport::overall() const {
  if (rss != Verdict::Pass) return Verdict::Fail;
  return irrepresentable;
}

double theorem_error_bound(const CertificateReport& report, double lambda) {
  if (lambda == 0.0) return 0.0;
  return report.error_bound_coefficient() * lambda;
}

// ------------------------------------------------------------------ certify

namespace {

CertificateReport certify_core(const Matrix& q, const Penalty& rho, const CertifyOptions& opts,
                               const Smoothness& sm, const std::optional<Vector>& grad) {
  CertificateReport r;
  r.error_norm = opts.error_norm ? *opts.error_norm : default_error_norm(rho);
  const IrrepResult ir = irrep_check(rho, q, opts.seed);
  r.irrep_sup = ir.sup;
  r.tau = ir.tau;
  r.irrepresentable = ir.verdict;
  r.irrep_method = ir.method;

  const Compatibility c = compatibility_constants(rho, r.error_norm, q, opts.seed);
  r.kappa_err = c.kappa_err;
  r.kappa_err_star = c.kappa_err_star;
  r.kappa_A = c.kappa_A;
  r.tau_bar_raw = c.tau_bar;
  r.tau_bar_restricted = c.tau_bar_restricted;
  r.tau_bar = c.tau_bar;
  if (r.irrepresentable == Verdict::Pass && r.tau_bar <= r.tau) r.tau_bar = r.tau * (1.0 + 1e-6);
  r.constants_estimated = !c.exact || sm.estimated;

  r.m_C = sm.m_C;
  r.L_C = sm.L_C;
  r.rss = sm.m_C > 1e-12 ? Verdict::Pass : Verdict::Fail;

  if (grad) {
    r.has_gradient = true;
    r.grad_norm = error_norm(r.error_norm, *grad, penalty_groups(rho));
  }
  r.lambda_window = lambda_window(r, r.grad_norm);
  return r;
}

}  // namespace

CertificateReport certify(const Loss& loss, const Penalty& rho, const CertifyOptions& opts) {
  require_dim(loss.dim(), rho.dim(), "certify");
  const Vector at = opts.theta_star ? *opts.theta_star : loss.initial_point();
  if (!opts.theta_star && !loss.quadratic())
    throw Error("certify: theta_star is required for non-quadratic losses");
  const Matrix q = loss.hessian(at);
  const Smoothness sm = smoothness_constants(loss, rho, at, opts.radius, opts.seed);
  std::optional<Vector> grad;
  if (opts.theta_star) grad = loss.gradient(*opts.theta_star);
  return certify_core(q, rho, opts, sm, grad);
}

CertificateReport certify_quadratic(const Matrix& q, const Penalty& rho,
                                    const CertifyOptions& opts) {
  check_symmetric(q, rho.dim(), "certify");
  Smoothness sm;
  if (rho.M().dim() > 0) {
    const Matrix& b = rho.M().basis();
    sm.m_C = Eigen::SelfAdjointEigenSolver<Matrix>(b.transpose() * q * b, Eigen::EigenvaluesOnly)
                 .eigenvalues()
                 .minCoeff();
  }
  return certify_core(q, rho, opts, sm, std::nullopt);
}

// ------------------------------------------------------------------ witness

namespace {

bool singleton(const LiftedSet& set, Vector& point) {
  point = Vector::Zero(set.ambient);
  for (const auto& part : set.parts) {
    if (part.dim() == 0) continue;
    if (part.kind != BaseKind::Simplex || part.dim() != 1) return false;
    point += part.map.col(0);
  }
  return true;
}

}  // namespace

WitnessReport dual_certificate(const Loss& loss, const Penalty& rho, double lambda,
                               const Vector& theta_hat) {
  require_dim(theta_hat.size(), rho.dim(), "dual_certificate");
  if (!(lambda > 0.0)) throw Error("dual_certificate: lambda must be positive");
  WitnessReport w;
  w.lambda = lambda;
  w.theta_hat = theta_hat;
  const int p = rho.dim();
  const Vector g = loss.gradient(theta_hat);
  const Matrix& b = rho.M().basis();
  const Vector h = -(b.transpose() * g) / lambda;
  const double stat_tol = 1e-7 * (1.0 + lambda);

  // v_A in the face of A exposed by theta_hat with P_M(grad + lambda v_A) = 0.
  const LiftedSet face = lift(support_face(rho.A(), theta_hat));
  Vector v_a;
  if (!singleton(face, v_a)) {
    std::vector<BasePart> parts;
    for (const auto& part : face.parts)
      if (part.dim() > 0) parts.push_back(part);
    const FeasibilitySolver solver(parts, b.transpose());
    const double tol = 0.1 * stat_tol / lambda / std::max(1.0, h.norm());
    const FeasibilityResult fr = solver.solve(h, 1.0, tol);
    if (fr.status != Feasibility::Feasible) {
      w.indeterminate = true;
      w.u_A = Vector::Zero(p);
      return w;
    }
    v_a = solver.combine(fr.blocks);
  }
  w.u_A = v_a;
  w.stationarity_residual = (b.transpose() * (g + lambda * v_a)).norm();

  const Matrix p_perp = Matrix::Identity(p, p) - b * b.transpose();
  const Vector v_perp = p_perp * (-g / lambda - v_a);
  const VResult vr = V_value(rho, v_perp);
  w.u_I = vr.u_I;
  w.u_S_perp = vr.u_S_perp;
  if (vr.value.unbounded) {
    w.gauge_I_of_u_I = kInf;
  } else {
    const GaugeResult gi = gauge_value(rho.I(), vr.u_I);
    w.gauge_I_of_u_I = gi.value.unbounded ? kInf : gi.bracket.hi;
    if (!gi.converged || !vr.converged) w.indeterminate = true;
  }
  w.certified_unique =
      !w.indeterminate && w.gauge_I_of_u_I < 1.0 && w.stationarity_residual <= stat_tol;
  return w;
}

// ------------------------------------------------------------------ converse

Interval wilson_interval(int k, int n, double z) {
  if (n <= 0) return {0.0, 1.0};
  const double ph = static_cast<double>(k) / n;
  const double z2 = z * z;
  const double den = 1.0 + z2 / n;
  const double center = (ph + z2 / (2.0 * n)) / den;
  const double half = z * std::sqrt(ph * (1.0 - ph) / n + z2 / (4.0 * n * n)) / den;
  return {k == 0 ? 0.0 : std::max(0.0, center - half), k == n ? 1.0 : std::min(1.0, center + half)};
}

ConverseReport converse_check(const Penalty& rho, const Matrix& q, const Vector& theta_star,
                              const ConverseOptions& opts) {
  require_dim(theta_star.size(), rho.dim(), "converse_check");
  ConverseReport rep;
  const LiftedSet a = lift(rho.A());
  if (!a.polyhedral()) throw UnsupportedError("converse_check: A must be polyhedral");
  Vector z;
  if (!singleton(lift(support_face(rho.A(), theta_star)), z)) {
    rep.reason = "precondition failed: theta_star does not expose a single point of A";
    return rep;
  }
  const IrrepMap map = irrep_map(rho, q);
  const VOracle v(rho);
  rep.violation = v.value(map.K * z);
  if (rep.violation < 1.0) {
    rep.reason = "irrepresentable condition holds; the converse does not apply";
    return rep;
  }
  if (rho.kind() != PenaltyKind::Lasso)
    throw UnsupportedError("converse_check: simulation is implemented for lasso penalties");
  rep.applicable = true;

  const int p = rho.dim();
  IndexSet all;
  for (int i = 0; i < p; ++i) all.push_back(i);
  IndexSet penalized;
  for (int i : all)
    if (std::find(rho.meta().free.begin(), rho.meta().free.end(), i) == rho.meta().free.end())
      penalized.push_back(i);
  const Penalty fit = make_lasso(p, penalized, rho.meta().free);

  const int gp = std::max(opts.grid_points, 1);
  rep.lambdas.resize(gp);
  for (int j = 0; j < gp; ++j) {
    const double f = gp == 1 ? 0.0 : static_cast<double>(j) / (gp - 1);
    rep.lambdas[j] = std::exp(std::log(opts.lambda_min) + f * (std::log(opts.lambda_max) - std::log(opts.lambda_min)));
  }

  LinearSpec spec;
  spec.p = p;
  spec.n = opts.n;
  spec.sigma = opts.sigma;
  spec.covariance = q;
  spec.theta_star = theta_star;
  spec.s = static_cast<int>(EstimandSpec::from_theta(theta_star).active.size());

  std::vector<std::vector<char>> hits(opts.trials, std::vector<char>(gp, 0));
  for_each_index(static_cast<std::size_t>(opts.trials),
                 opts.parallel ? Execution::Parallel : Execution::Serial, [&](std::size_t t) {
                   const LinearDataset ds = gen_linear(spec, opts.seed + t);
                   EstimandSpec truth = ds.estimand;
                   SolverOptions so;
                   // Descending lambda path with warm starts.
                   for (int j = gp - 1; j >= 0; --j) {
                     const EstimateResult er = solve(*ds.loss, fit, rep.lambdas[j], so);
                     hits[t][j] = er.converged && success_indicator(er.theta_hat, truth, so.eps_supp);
                     so.init = er.theta_hat;
                   }
                 });
  rep.trials = opts.trials;
  rep.successes.assign(gp, 0);
  for (int t = 0; t < opts.trials; ++t)
    for (int j = 0; j < gp; ++j) rep.successes[j] += hits[t][j];
  int best = 0;
  for (int j = 1; j < gp; ++j)
    if (rep.successes[j] > rep.successes[best]) best = j;
  rep.best_lambda = rep.lambdas[best];
  rep.max_success = opts.trials ? static_cast<double>(rep.successes[best]) / opts.trials : 0.0;
  rep.wilson = wilson_interval(rep.successes[best], opts.trials);
  return rep;
}

}  // namespace gdpen
