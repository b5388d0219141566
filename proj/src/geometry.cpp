#include "gdpen/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gdpen/lifted.hpp"

namespace gdpen {

// ----------------------------------------------------------------- Subspace

Subspace Subspace::span(const Matrix& columns, double rel_tol) {
  const int p = static_cast<int>(columns.rows());
  if (columns.cols() == 0) return zero(p);
  Eigen::JacobiSVD<Matrix> svd(columns, Eigen::ComputeThinU);
  const Vector& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] <= 1e-300) return zero(p);
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv[rank] > rel_tol * sv[0]) ++rank;
  return Subspace(svd.matrixU().leftCols(rank), p);
}

Subspace Subspace::full(int ambient) {
  return Subspace(Matrix::Identity(ambient, ambient), ambient);
}

Subspace Subspace::zero(int ambient) { return Subspace(Matrix::Zero(ambient, 0), ambient); }

Subspace Subspace::coordinates(int ambient, const IndexSet& coords) {
  std::set<int> sorted(coords.begin(), coords.end());
  Matrix b = Matrix::Zero(ambient, static_cast<Eigen::Index>(sorted.size()));
  Eigen::Index k = 0;
  for (int i : sorted) {
    if (i < 0 || i >= ambient) throw DimensionError("coordinate index out of range");
    b(i, k++) = 1.0;
  }
  return Subspace(std::move(b), ambient);
}

Subspace Subspace::null_space(const Matrix& rows, double rel_tol) {
  const int p = static_cast<int>(rows.cols());
  if (rows.rows() == 0) return full(p);
  Eigen::JacobiSVD<Matrix> svd(rows, Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  Eigen::Index rank = 0;
  if (sv.size() > 0 && sv[0] > 1e-300) {
    while (rank < sv.size() && sv[rank] > rel_tol * sv[0]) ++rank;
  }
  return Subspace(svd.matrixV().rightCols(p - rank), p);
}

Subspace Subspace::complement() const {
  if (dim() == 0) return full(ambient_);
  if (is_full()) return zero(ambient_);
  if (auto coords = coordinate_support()) {
    IndexSet rest;
    std::set<int> in(coords->begin(), coords->end());
    for (int i = 0; i < ambient_; ++i)
      if (!in.count(i)) rest.push_back(i);
    return coordinates(ambient_, rest);
  }
  return null_space(basis_.transpose());
}

bool Subspace::contains(const Vector& x, double tol) const {
  require_dim(x.size(), ambient_, "Subspace::contains");
  const Vector r = x - basis_ * (basis_.transpose() * x);
  return r.norm() <= tol * std::max(1.0, x.norm());
}

std::optional<IndexSet> Subspace::coordinate_support(double tol) const {
  IndexSet coords;
  for (int i = 0; i < ambient_; ++i) {
    const double d = basis_.row(i).squaredNorm();
    if (std::abs(d - 1.0) <= tol) {
      coords.push_back(i);
    } else if (d > tol) {
      return std::nullopt;
    }
  }
  return coords;
}

Subspace subspace_intersect(const Subspace& u, const Subspace& w) {
  require_dim(u.ambient_dim(), w.ambient_dim(), "subspace_intersect");
  const int p = u.ambient_dim();
  if (u.dim() == 0 || w.dim() == 0) return Subspace::zero(p);
  auto cu = u.coordinate_support();
  auto cw = w.coordinate_support();
  if (cu && cw) {
    IndexSet both;
    std::set_intersection(cu->begin(), cu->end(), cw->begin(), cw->end(),
                          std::back_inserter(both));
    return Subspace::coordinates(p, both);
  }
  Matrix stacked(2 * p, p);
  const Matrix eye = Matrix::Identity(p, p);
  stacked.topRows(p) = eye - u.projector();
  stacked.bottomRows(p) = eye - w.projector();
  return Subspace::null_space(stacked, 1e-10);
}

Subspace subspace_sum(const Subspace& u, const Subspace& w) {
  require_dim(u.ambient_dim(), w.ambient_dim(), "subspace_sum");
  Matrix cols(u.ambient_dim(), u.dim() + w.dim());
  cols << u.basis(), w.basis();
  return Subspace::span(cols);
}

Vector project(const Subspace& u, const Vector& x) {
  require_dim(x.size(), u.ambient_dim(), "project");
  return u.basis() * (u.basis().transpose() * x);
}

RestrictedInverse restricted_inverse(const Matrix& q, const Subspace& m, double tol) {
  const Eigen::Index p = m.ambient_dim();
  if (q.rows() != p || q.cols() != p) throw DimensionError("restricted_inverse: Q shape");
  if ((q - q.transpose()).norm() > 1e-10 * std::max(1.0, q.norm()))
    throw Error("restricted_inverse: Q is not symmetric");
  RestrictedInverse out;
  out.basis = m.basis();
  const Eigen::Index k = m.dim();
  if (k == 0) {
    out.inv = Matrix::Zero(0, 0);
    return out;
  }
  Matrix qm = out.basis.transpose() * q * out.basis;
  qm = 0.5 * (qm + qm.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(qm);
  const Vector& ev = eig.eigenvalues();
  const double lmax = ev.cwiseAbs().maxCoeff();
  const double cut = tol * lmax;
  out.min_eigenvalue = ev.minCoeff();
  out.max_eigenvalue = ev.maxCoeff();
  out.not_psd = out.min_eigenvalue < -cut;
  Vector inv_ev = Vector::Zero(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    if (ev[i] > cut) {
      inv_ev[i] = 1.0 / ev[i];
      ++out.rank;
    }
  }
  out.inv = eig.eigenvectors() * inv_ev.asDiagonal() * eig.eigenvectors().transpose();
  return out;
}

PinvResult restricted_pinv_apply(const Matrix& q, const Subspace& m, const Vector& x,
                                 double tol) {
  require_dim(x.size(), m.ambient_dim(), "restricted_pinv_apply");
  if (!(tol > 0.0)) throw Error("restricted_pinv_apply: tol must be positive");
  const RestrictedInverse ri = restricted_inverse(q, m, tol);
  PinvResult out;
  out.rank = ri.rank;
  out.not_psd = ri.not_psd;
  out.min_eigenvalue = ri.min_eigenvalue;
  if (m.dim() == 0) {
    out.value = Vector::Zero(x.size());
  } else {
    out.value = ri.basis * (ri.inv * (ri.basis.transpose() * x));
  }
  return out;
}

// ---------------------------------------------------------------- ConvexSet

namespace {

void check_index_set(const IndexSet& idx, int dim, const char* what) {
  std::set<int> seen;
  for (int i : idx) {
    if (i < 0 || i >= dim) throw InvalidSetError(std::string(what) + ": index out of range");
    if (!seen.insert(i).second) throw InvalidSetError(std::string(what) + ": repeated index");
  }
}

ConvexSetPtr share(const ConvexSet& s) { return std::make_shared<const ConvexSet>(s); }

double face_tol(double scale) { return 1e-10 * std::max(1.0, scale); }

}  // namespace

ConvexSet ConvexSet::atoms(Matrix atoms) {
  if (atoms.cols() < 1) throw InvalidSetError("AtomPolytope needs at least one atom");
  const int d = static_cast<int>(atoms.rows());
  return ConvexSet(AtomPolytope{std::move(atoms)}, d);
}

ConvexSet ConvexSet::point(const Vector& p) { return atoms(Matrix(p)); }

ConvexSet ConvexSet::coord_box(int dim, IndexSet coords) {
  check_index_set(coords, dim, "CoordBox");
  std::sort(coords.begin(), coords.end());
  return ConvexSet(CoordBox{dim, std::move(coords)}, dim);
}

ConvexSet ConvexSet::group_ball(int dim, std::vector<IndexSet> groups, IndexSet active) {
  IndexSet all;
  for (const auto& g : groups) {
    if (g.empty()) throw InvalidSetError("GroupBall: empty group");
    all.insert(all.end(), g.begin(), g.end());
  }
  std::set<int> seen;
  for (int i : all) {
    if (i < 0 || i >= dim) throw InvalidSetError("GroupBall: index out of range");
    if (!seen.insert(i).second)
      throw InvalidSetError(
          "GroupBall: groups overlap; duplicate the parameters in overlapping groups "
          "and enforce equality through the subspace constraint");
  }
  check_index_set(active, static_cast<int>(groups.size()), "GroupBall active groups");
  std::sort(active.begin(), active.end());
  return ConvexSet(GroupBall{dim, std::move(groups), std::move(active)}, dim);
}

ConvexSet ConvexSet::linear_image(Matrix map, const ConvexSet& base) {
  if (map.cols() != base.dim())
    throw DimensionError("LinearImage: map columns must match the base dimension");
  const int d = static_cast<int>(map.rows());
  return ConvexSet(LinearImage{std::move(map), share(base)}, d);
}

ConvexSet ConvexSet::minkowski(const std::vector<ConvexSet>& parts) {
  if (parts.empty()) throw InvalidSetError("MinkowskiSum needs at least one part");
  MinkowskiSum sum;
  const int d = parts.front().dim();
  for (const auto& p : parts) {
    require_dim(p.dim(), d, "MinkowskiSum");
    sum.parts.push_back(share(p));
  }
  return ConvexSet(std::move(sum), d);
}

ConvexSet ConvexSet::subspace(Subspace s) {
  const int d = s.ambient_dim();
  return ConvexSet(SubspaceSet{std::move(s)}, d);
}

ConvexSet ConvexSet::origin(int dim) { return coord_box(dim, {}); }

bool ConvexSet::bounded() const {
  return std::visit(
      [](const auto& rep) -> bool {
        using T = std::decay_t<decltype(rep)>;
        if constexpr (std::is_same_v<T, SubspaceSet>) {
          return rep.subspace.dim() == 0;
        } else if constexpr (std::is_same_v<T, LinearImage>) {
          return rep.base->bounded();
        } else if constexpr (std::is_same_v<T, MinkowskiSum>) {
          return std::all_of(rep.parts.begin(), rep.parts.end(),
                             [](const ConvexSetPtr& p) { return p->bounded(); });
        } else {
          return true;
        }
      },
      rep_);
}

ExtReal support_value(const ConvexSet& set, const Vector& x) {
  require_dim(x.size(), set.dim(), "support_value");
  return std::visit(
      [&](const auto& rep) -> ExtReal {
        using T = std::decay_t<decltype(rep)>;
        if constexpr (std::is_same_v<T, AtomPolytope>) {
          return ExtReal::finite((rep.atoms.transpose() * x).maxCoeff());
        } else if constexpr (std::is_same_v<T, CoordBox>) {
          double s = 0.0;
          for (int i : rep.coords) s += std::abs(x[i]);
          return ExtReal::finite(s);
        } else if constexpr (std::is_same_v<T, GroupBall>) {
          double s = 0.0;
          for (int g : rep.active) {
            double sq = 0.0;
            for (int i : rep.groups[g]) sq += x[i] * x[i];
            s += std::sqrt(sq);
          }
          return ExtReal::finite(s);
        } else if constexpr (std::is_same_v<T, LinearImage>) {
          return support_value(*rep.base, rep.map.transpose() * x);
        } else if constexpr (std::is_same_v<T, MinkowskiSum>) {
          ExtReal total;
          for (const auto& p : rep.parts) total += support_value(*p, x);
          return total;
        } else {
          const Vector c = rep.subspace.basis().transpose() * x;
          return c.norm() <= 1e-10 * std::max(1.0, x.norm()) ? ExtReal::finite(0.0)
                                                               : ExtReal::infinite();
        }
      },
      set.rep());
}

namespace {

bool origin_in(const ConvexSet& set) {
  const bool simple = std::visit(
      [](const auto& rep) {
        using T = std::decay_t<decltype(rep)>;
        return std::is_same_v<T, CoordBox> || std::is_same_v<T, GroupBall> ||
               std::is_same_v<T, SubspaceSet>;
      },
      set.rep());
  if (simple) return true;
  return contains(set, Vector::Zero(set.dim()));
}

}  // namespace

GaugeResult gauge_value(const ConvexSet& set, const Vector& z) {
  require_dim(z.size(), set.dim(), "gauge_value");
  if (!origin_in(set)) throw InvalidSetError("gauge_value: the set does not contain the origin");
  GaugeResult out;
  if (z.isZero(0.0)) {
    out.value = ExtReal::finite(0.0);
    out.bracket = {0.0, 0.0};
    return out;
  }
  const double off_tol = 1e-10 * std::max(1.0, z.lpNorm<Eigen::Infinity>());
  auto finish = [&](double v, bool inf) {
    out.value = inf ? ExtReal::infinite() : ExtReal::finite(v);
    out.bracket = {inf ? kInf : v, inf ? kInf : v};
    return out;
  };

  if (const auto* box = std::get_if<CoordBox>(&set.rep())) {
    std::vector<char> in(set.dim(), 0);
    double m = 0.0;
    for (int i : box->coords) {
      in[i] = 1;
      m = std::max(m, std::abs(z[i]));
    }
    for (int i = 0; i < set.dim(); ++i)
      if (!in[i] && std::abs(z[i]) > off_tol) return finish(0.0, true);
    return finish(m, false);
  }
  if (const auto* ball = std::get_if<GroupBall>(&set.rep())) {
    std::vector<char> in(set.dim(), 0);
    double m = 0.0;
    for (int g : ball->active) {
      double sq = 0.0;
      for (int i : ball->groups[g]) {
        in[i] = 1;
        sq += z[i] * z[i];
      }
      m = std::max(m, std::sqrt(sq));
    }
    for (int i = 0; i < set.dim(); ++i)
      if (!in[i] && std::abs(z[i]) > off_tol) return finish(0.0, true);
    return finish(m, false);
  }
  if (const auto* sub = std::get_if<SubspaceSet>(&set.rep())) {
    return finish(0.0, !sub->subspace.contains(z));
  }

  const LiftedSet lifted = lift(set);
  const FeasibilitySolver solver(lifted.parts, Matrix::Identity(set.dim(), set.dim()));
  const ScaledGauge g = scaled_gauge(solver, z);
  out.value = g.value;
  out.bracket = g.bracket;
  out.converged = g.converged;
  out.exact = g.converged;
  return out;
}

ConvexSet support_face(const ConvexSet& set, const Vector& x) {
  require_dim(x.size(), set.dim(), "support_face");
  if (!set.bounded()) throw UnsupportedError("support_face: unbounded set");
  if (x.isZero(0.0)) return set;
  const double scale = x.lpNorm<Eigen::Infinity>();
  return std::visit(
      [&](const auto& rep) -> ConvexSet {
        using T = std::decay_t<decltype(rep)>;
        if constexpr (std::is_same_v<T, AtomPolytope>) {
          const Vector vals = rep.atoms.transpose() * x;
          const double h = vals.maxCoeff();
          const double tol = face_tol(std::abs(h) + scale);
          std::vector<Eigen::Index> keep;
          for (Eigen::Index k = 0; k < vals.size(); ++k)
            if (vals[k] >= h - tol) keep.push_back(k);
          Matrix a(rep.atoms.rows(), static_cast<Eigen::Index>(keep.size()));
          for (size_t k = 0; k < keep.size(); ++k) a.col(static_cast<Eigen::Index>(k)) = rep.atoms.col(keep[k]);
          return ConvexSet::atoms(std::move(a));
        } else if constexpr (std::is_same_v<T, CoordBox>) {
          const double tol = face_tol(scale);
          Vector fixed = Vector::Zero(rep.dim);
          IndexSet free_coords;
          for (int i : rep.coords) {
            if (std::abs(x[i]) > tol) {
              fixed[i] = x[i] > 0 ? 1.0 : -1.0;
            } else {
              free_coords.push_back(i);
            }
          }
          if (free_coords.empty()) return ConvexSet::point(fixed);
          if (fixed.isZero(0.0)) return ConvexSet::coord_box(rep.dim, free_coords);
          return ConvexSet::minkowski(
              {ConvexSet::point(fixed), ConvexSet::coord_box(rep.dim, free_coords)});
        } else if constexpr (std::is_same_v<T, GroupBall>) {
          const double tol = face_tol(scale);
          Vector fixed = Vector::Zero(rep.dim);
          IndexSet free_groups;
          for (int g : rep.active) {
            double sq = 0.0;
            for (int i : rep.groups[g]) sq += x[i] * x[i];
            const double nrm = std::sqrt(sq);
            if (nrm > tol) {
              for (int i : rep.groups[g]) fixed[i] = x[i] / nrm;
            } else {
              free_groups.push_back(g);
            }
          }
          if (free_groups.empty()) return ConvexSet::point(fixed);
          ConvexSet ball = ConvexSet::group_ball(rep.dim, rep.groups, free_groups);
          if (fixed.isZero(0.0)) return ball;
          return ConvexSet::minkowski({ConvexSet::point(fixed), ball});
        } else if constexpr (std::is_same_v<T, LinearImage>) {
          return ConvexSet::linear_image(rep.map, support_face(*rep.base, rep.map.transpose() * x));
        } else if constexpr (std::is_same_v<T, MinkowskiSum>) {
          std::vector<ConvexSet> faces;
          for (const auto& p : rep.parts) faces.push_back(support_face(*p, x));
          return ConvexSet::minkowski(faces);
        } else {
          return set;  // bounded subspace set is {0}
        }
      },
      set.rep());
}

Subspace span_of(const ConvexSet& set) {
  return std::visit(
      [&](const auto& rep) -> Subspace {
        using T = std::decay_t<decltype(rep)>;
        if constexpr (std::is_same_v<T, AtomPolytope>) {
          return Subspace::span(rep.atoms);
        } else if constexpr (std::is_same_v<T, CoordBox>) {
          return Subspace::coordinates(rep.dim, rep.coords);
        } else if constexpr (std::is_same_v<T, GroupBall>) {
          IndexSet coords;
          for (int g : rep.active)
            coords.insert(coords.end(), rep.groups[g].begin(), rep.groups[g].end());
          return Subspace::coordinates(rep.dim, coords);
        } else if constexpr (std::is_same_v<T, LinearImage>) {
          const Subspace base = span_of(*rep.base);
          return Subspace::span(rep.map * base.basis());
        } else if constexpr (std::is_same_v<T, MinkowskiSum>) {
          Subspace acc = span_of(*rep.parts.front());
          for (size_t k = 1; k < rep.parts.size(); ++k) acc = subspace_sum(acc, span_of(*rep.parts[k]));
          return acc;
        } else {
          return rep.subspace;
        }
      },
      set.rep());
}

bool contains(const ConvexSet& set, const Vector& y, double tol) {
  require_dim(y.size(), set.dim(), "contains");
  const double slack = tol * std::max(1.0, y.norm());
  if (const auto* box = std::get_if<CoordBox>(&set.rep())) {
    std::vector<char> in(set.dim(), 0);
    for (int i : box->coords) {
      in[i] = 1;
      if (std::abs(y[i]) > 1.0 + slack) return false;
    }
    for (int i = 0; i < set.dim(); ++i)
      if (!in[i] && std::abs(y[i]) > slack) return false;
    return true;
  }
  if (const auto* sub = std::get_if<SubspaceSet>(&set.rep())) return sub->subspace.contains(y, tol);
  const LiftedSet lifted = lift(set);
  const FeasibilitySolver solver(lifted.parts, Matrix::Identity(set.dim(), set.dim()));
  return solver.solve(y, 1.0, tol).status == Feasibility::Feasible;
}

Vector sample_point(const ConvexSet& set, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  return std::visit(
      [&](const auto& rep) -> Vector {
        using T = std::decay_t<decltype(rep)>;
        if constexpr (std::is_same_v<T, AtomPolytope>) {
          std::exponential_distribution<double> ex(1.0);
          Vector w(rep.atoms.cols());
          for (Eigen::Index k = 0; k < w.size(); ++k) w[k] = ex(rng);
          return rep.atoms * (w / w.sum());
        } else if constexpr (std::is_same_v<T, CoordBox>) {
          Vector y = Vector::Zero(rep.dim);
          for (int i : rep.coords) y[i] = unif(rng);
          return y;
        } else if constexpr (std::is_same_v<T, GroupBall>) {
          Vector y = Vector::Zero(rep.dim);
          std::uniform_real_distribution<double> radius(0.0, 1.0);
          for (int g : rep.active) {
            double sq = 0.0;
            for (int i : rep.groups[g]) {
              y[i] = gauss(rng);
              sq += y[i] * y[i];
            }
            const double r = radius(rng) / std::max(std::sqrt(sq), 1e-300);
            for (int i : rep.groups[g]) y[i] *= r;
          }
          return y;
        } else if constexpr (std::is_same_v<T, LinearImage>) {
          return rep.map * sample_point(*rep.base, rng);
        } else if constexpr (std::is_same_v<T, MinkowskiSum>) {
          Vector y = Vector::Zero(set.dim());
          for (const auto& p : rep.parts) y += sample_point(*p, rng);
          return y;
        } else {
          Vector c(rep.subspace.dim());
          for (Eigen::Index k = 0; k < c.size(); ++k) c[k] = gauss(rng);
          return rep.subspace.basis() * c;
        }
      },
      set.rep());
}

}  // namespace gdpen
