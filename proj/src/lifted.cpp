#include "gdpen/lifted.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gdpen {

namespace {

Matrix selection(int ambient, const IndexSet& coords) {
  Matrix s = Matrix::Zero(ambient, static_cast<Eigen::Index>(coords.size()));
  for (size_t k = 0; k < coords.size(); ++k) s(coords[k], static_cast<Eigen::Index>(k)) = 1.0;
  return s;
}

// outer == nullptr stands for the identity.
Matrix compose(const Matrix* outer, const Matrix& inner) { return outer ? Matrix(*outer * inner) : inner; }

void lift_into(const ConvexSet& set, const Matrix* outer, std::vector<BasePart>& out) {
  std::visit(
      [&](const auto& rep) {
        using T = std::decay_t<decltype(rep)>;
        if constexpr (std::is_same_v<T, AtomPolytope>) {
          out.push_back({BaseKind::Simplex, compose(outer, rep.atoms), {}});
        } else if constexpr (std::is_same_v<T, CoordBox>) {
          if (!rep.coords.empty())
            out.push_back({BaseKind::Box, compose(outer, selection(rep.dim, rep.coords)), {}});
        } else if constexpr (std::is_same_v<T, GroupBall>) {
          IndexSet coords;
          std::vector<IndexSet> local;
          for (int g : rep.active) {
            IndexSet lg;
            for (int i : rep.groups[g]) {
              lg.push_back(static_cast<int>(coords.size()));
              coords.push_back(i);
            }
            local.push_back(std::move(lg));
          }
          if (!coords.empty())
            out.push_back({BaseKind::BallProduct, compose(outer, selection(rep.dim, coords)), local});
        } else if constexpr (std::is_same_v<T, LinearImage>) {
          const Matrix m = compose(outer, rep.map);
          lift_into(*rep.base, &m, out);
        } else if constexpr (std::is_same_v<T, MinkowskiSum>) {
          for (const auto& part : rep.parts) lift_into(*part, outer, out);
        } else if constexpr (std::is_same_v<T, SubspaceSet>) {
          if (rep.subspace.dim() > 0)
            out.push_back({BaseKind::Whole, compose(outer, rep.subspace.basis()), {}});
        }
      },
      set.rep());
}

}  // namespace

int LiftedSet::lifted_dim() const {
  int d = 0;
  for (const auto& p : parts) d += p.dim();
  return d;
}

bool LiftedSet::polyhedral() const {
  return std::all_of(parts.begin(), parts.end(), [](const BasePart& p) {
    return p.kind == BaseKind::Box || p.kind == BaseKind::Simplex ||
           (p.kind == BaseKind::BallProduct &&
            std::all_of(p.groups.begin(), p.groups.end(),
                        [](const IndexSet& g) { return g.size() == 1; }));
  });
}

LiftedSet lift(const ConvexSet& set) {
  LiftedSet out;
  out.ambient = set.dim();
  lift_into(set, nullptr, out.parts);
  return out;
}

ExtReal base_support(const BasePart& part, const Vector& v) {
  switch (part.kind) {
    case BaseKind::Box:
      return ExtReal::finite(v.lpNorm<1>());
    case BaseKind::BallProduct: {
      double s = 0.0;
      for (const auto& g : part.groups) {
        double sq = 0.0;
        for (int i : g) sq += v[i] * v[i];
        s += std::sqrt(sq);
      }
      return ExtReal::finite(s);
    }
    case BaseKind::Simplex:
      return ExtReal::finite(v.maxCoeff());
    case BaseKind::Whole:
      return v.norm() <= 1e-10 ? ExtReal::finite(0.0) : ExtReal::infinite();
  }
  return ExtReal::infinite();
}

Vector project_simplex(const Vector& v, double radius) {
  const Eigen::Index n = v.size();
  if (radius <= 0.0) return Vector::Zero(n);
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0;
  double theta = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cum += u[k];
    const double t = (cum - radius) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0) theta = t;
  }
  return (v.array() - theta).max(0.0).matrix();
}

Vector base_project(const BasePart& part, const Vector& v, double t) {
  switch (part.kind) {
    case BaseKind::Box:
      return v.cwiseMax(-t).cwiseMin(t);
    case BaseKind::BallProduct: {
      Vector out = v;
      for (const auto& g : part.groups) {
        double sq = 0.0;
        for (int i : g) sq += v[i] * v[i];
        const double nrm = std::sqrt(sq);
        if (nrm > t) {
          const double scale = t / nrm;
          for (int i : g) out[i] *= scale;
        }
      }
      return out;
    }
    case BaseKind::Simplex:
      return project_simplex(v, t);
    case BaseKind::Whole:
      return v;
  }
  return v;
}

Vector base_lmo(const BasePart& part, const Vector& s) {
  switch (part.kind) {
    case BaseKind::Box: {
      Vector out(s.size());
      for (Eigen::Index i = 0; i < s.size(); ++i) out[i] = s[i] >= 0.0 ? 1.0 : -1.0;
      return out;
    }
    case BaseKind::BallProduct: {
      Vector out = Vector::Zero(s.size());
      for (const auto& g : part.groups) {
        double sq = 0.0;
        for (int i : g) sq += s[i] * s[i];
        const double nrm = std::sqrt(sq);
        if (nrm > 0.0) {
          for (int i : g) out[i] = s[i] / nrm;
        } else {
          out[g.front()] = 1.0;
        }
      }
      return out;
    }
    case BaseKind::Simplex: {
      Eigen::Index k = 0;
      s.maxCoeff(&k);
      Vector out = Vector::Zero(s.size());
      out[k] = 1.0;
      return out;
    }
    case BaseKind::Whole:
      throw UnsupportedError("linear maximization over an unbounded part");
  }
  return s;
}

ExtReal lifted_support(const LiftedSet& set, const Vector& x) {
  require_dim(x.size(), set.ambient, "lifted_support");
  ExtReal total;
  const double scale = std::max(1.0, x.norm());
  for (const auto& part : set.parts) {
    const Vector v = part.map.transpose() * x;
    if (part.kind == BaseKind::Whole) {
      total += v.norm() <= 1e-10 * scale ? ExtReal::finite(0.0) : ExtReal::infinite();
    } else {
      total += base_support(part, v);
    }
  }
  return total;
}

// ---------------------------------------------------------------------------

FeasibilitySolver::FeasibilitySolver(std::vector<BasePart> parts, const Matrix& row_map)
    : parts_(std::move(parts)) {
  const Eigen::Index r = row_map.rows();
  int total = 0;
  for (const auto& p : parts_) {
    offsets_.push_back(total);
    g_blocks_.push_back(row_map * p.map);
    total += p.dim();
    if (p.kind == BaseKind::Whole) has_whole_ = true;
  }
  g_.resize(r, total);
  for (size_t j = 0; j < parts_.size(); ++j)
    g_.middleCols(offsets_[j], parts_[j].dim()) = g_blocks_[j];

  if (total == 0 || r == 0) {
    g_pinv_ = Matrix::Zero(total, r);
    gg_pinv_ = Matrix::Zero(r, r);
    range_proj_ = Matrix::Zero(r, r);
  } else {
    Eigen::JacobiSVD<Matrix> svd(g_, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    const double cut = 1e-12 * std::max(sv.size() ? sv[0] : 0.0, 1e-300);
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv[rank] > cut) ++rank;
    const Matrix u = svd.matrixU().leftCols(rank);
    const Matrix v = svd.matrixV().leftCols(rank);
    const Vector s = sv.head(rank);
    g_pinv_ = v * s.cwiseInverse().asDiagonal() * u.transpose();
    gg_pinv_ = u * s.cwiseAbs2().cwiseInverse().asDiagonal() * u.transpose();
    range_proj_ = u * u.transpose();
  }

  if (has_whole_) {
    int wd = 0;
    for (const auto& p : parts_)
      if (p.kind == BaseKind::Whole) wd += p.dim();
    Matrix rows(wd, r);
    int at = 0;
    for (size_t j = 0; j < parts_.size(); ++j) {
      if (parts_[j].kind != BaseKind::Whole) continue;
      rows.middleRows(at, parts_[j].dim()) = g_blocks_[j].transpose();
      at += parts_[j].dim();
    }
    whole_null_ = Subspace::null_space(rows, 1e-12).basis();
  }
}

void FeasibilitySolver::dual_split(const Vector& x, ExtReal& scaled, ExtReal& fixed) const {
  scaled = ExtReal::finite(0.0);
  fixed = ExtReal::finite(0.0);
  const double tol = 1e-10 * std::max(1.0, x.norm());
  for (size_t j = 0; j < parts_.size(); ++j) {
    const Vector v = g_blocks_[j].transpose() * x;
    if (parts_[j].kind == BaseKind::Whole) {
      fixed += v.norm() <= tol ? ExtReal::finite(0.0) : ExtReal::infinite();
    } else {
      scaled += base_support(parts_[j], v);
    }
  }
}

ExtReal FeasibilitySolver::dual_value(const Vector& x, double t) const {
  ExtReal s, f;
  dual_split(x, s, f);
  if (s.unbounded || f.unbounded) return ExtReal::infinite();
  return ExtReal::finite(t * s.value + f.value);
}

Vector FeasibilitySolver::combine(const std::vector<Vector>& blocks) const {
  const Eigen::Index ambient = parts_.empty() ? 0 : parts_.front().map.rows();
  Vector out = Vector::Zero(ambient);
  for (size_t j = 0; j < parts_.size(); ++j) out += parts_[j].map * blocks[j];
  return out;
}

FeasibilityResult FeasibilitySolver::solve(const Vector& h, double t, double tol,
                                           int max_iter) const {
  FeasibilityResult res;
  const double scale = std::max(1.0, h.norm());
  const double tol_abs = tol * scale;
  const Eigen::Index total = g_.cols();

  auto split = [&](const Vector& y) {
    std::vector<Vector> blocks;
    for (size_t j = 0; j < parts_.size(); ++j)
      blocks.push_back(y.segment(offsets_[j], parts_[j].dim()));
    return blocks;
  };

  if (total == 0) {
    if (h.norm() <= tol_abs) {
      res.status = Feasibility::Feasible;
    } else {
      res.status = Feasibility::Infeasible;
      res.certificate = h;
      res.gap = h.norm();
    }
    return res;
  }

  const Vector off_range = h - range_proj_ * h;
  if (off_range.norm() > tol_abs) {
    res.status = Feasibility::Infeasible;
    res.certificate = off_range;
    res.gap = off_range.norm();
    return res;
  }

  Vector y = g_pinv_ * h;
  Vector a(total);
  for (int it = 0; it < max_iter; ++it) {
    for (size_t j = 0; j < parts_.size(); ++j) {
      const int d = parts_[j].dim();
      a.segment(offsets_[j], d) = base_project(parts_[j], y.segment(offsets_[j], d), t);
    }
    const Vector resid = g_ * a - h;
    res.iterations = it + 1;
    res.gap = resid.norm();
    if (res.gap <= tol_abs) {
      res.status = Feasibility::Feasible;
      res.blocks = split(a);
      return res;
    }
    y = a - g_pinv_ * resid;

    Vector x = -(gg_pinv_ * resid);
    if (has_whole_) x = whole_null_ * (whole_null_.transpose() * x);
    const double xn = x.norm();
    if (xn > 0.0) {
      const ExtReal dual = dual_value(x, t);
      if (!dual.unbounded && x.dot(h) - dual.value > 1e-12 * xn * scale) {
        res.status = Feasibility::Infeasible;
        res.certificate = x;
        return res;
      }
    }
  }
  res.status = Feasibility::Unknown;
  res.blocks = split(a);
  return res;
}

namespace {

// Smallest s with every block in s * B_j; simplex blocks pin s to t.
double effective_scale(const std::vector<BasePart>& parts, const std::vector<Vector>& blocks,
                       double t) {
  double s = 0.0;
  for (size_t j = 0; j < parts.size(); ++j) {
    const Vector& y = blocks[j];
    switch (parts[j].kind) {
      case BaseKind::Box:
        if (y.size() > 0) s = std::max(s, y.lpNorm<Eigen::Infinity>());
        break;
      case BaseKind::BallProduct:
        for (const auto& g : parts[j].groups) {
          double sq = 0.0;
          for (int i : g) sq += y[i] * y[i];
          s = std::max(s, std::sqrt(sq));
        }
        break;
      case BaseKind::Simplex:
        return t;
      case BaseKind::Whole:
        break;
    }
  }
  return s;
}

}  // namespace

ScaledGauge scaled_gauge(const FeasibilitySolver& solver, const Vector& z, double rel_tol) {
  ScaledGauge out;
  if (z.norm() == 0.0) {
    out.value = ExtReal::finite(0.0);
    out.bracket = {0.0, 0.0};
    for (const auto& p : solver.parts()) out.blocks.push_back(Vector::Zero(p.dim()));
    return out;
  }

  double lo = 0.0;
  double hi = kInf;
  double t = 1.0;
  for (int step = 0; step < 400; ++step) {
    const FeasibilityResult r = solver.solve(z, t);
    if (r.status == Feasibility::Feasible) {
      hi = std::min(t, effective_scale(solver.parts(), r.blocks, t));
      out.blocks = r.blocks;
    } else if (r.status == Feasibility::Infeasible) {
      ExtReal s, f;
      solver.dual_split(r.certificate, s, f);
      const double xz = r.certificate.dot(z);
      lo = std::max(lo, t);
      if (!s.unbounded && !f.unbounded) {
        if (s.value <= 1e-14 * r.certificate.norm()) {
          out.value = ExtReal::infinite();
          out.bracket = {kInf, kInf};
          out.dual = r.certificate;
          return out;
        }
        const double bound = (xz - f.value) / s.value;
        if (bound > lo) {
          lo = bound;
          out.dual = r.certificate / s.value;
        } else if (out.dual.size() == 0) {
          out.dual = r.certificate / s.value;
        }
      }
    } else {
      out.converged = false;
      break;
    }

    if (std::isfinite(hi) && hi - lo <= rel_tol * std::max(hi, 1e-300)) break;
    if (!std::isfinite(hi)) {
      t = std::max(2.0 * t, 2.0 * lo);
      if (t > 1e300) {
        out.value = ExtReal::infinite();
        out.bracket = {lo, kInf};
        return out;
      }
    } else {
      // Probe just above the certified lower bound first; it is usually tight.
      const double probe = lo * (1.0 + 0.5 * rel_tol) + 1e-300;
      t = (probe < hi && step % 2 == 0 && lo > 0.0) ? probe : 0.5 * (lo + hi);
    }
  }
  out.bracket = {lo, hi};
  out.value = std::isfinite(hi) ? ExtReal::finite(hi) : ExtReal::infinite();
  return out;
}

}  // namespace gdpen
