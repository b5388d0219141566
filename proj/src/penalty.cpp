#include "gdpen/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gdpen/lifted.hpp"

namespace gdpen {

const char* to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::Lasso: return "lasso";
    case PenaltyKind::GroupLasso: return "group_lasso";
    case PenaltyKind::Analysis: return "analysis";
    case PenaltyKind::Hybrid: return "hybrid";
    case PenaltyKind::Custom: return "custom";
  }
  return "custom";
}

namespace {

// 0 in relint(I): the gauge of I is finite in both directions along a basis
// of span(I).
void check_relint_origin(const ConvexSet& i) {
  const Subspace sp = span_of(i);
  for (int k = 0; k < sp.dim(); ++k) {
    const Vector b = sp.basis().col(k);
    for (double sgn : {1.0, -1.0}) {
      const GaugeResult g = gauge_value(i, sgn * b);
      if (g.value.unbounded)
        throw InvalidSetError("penalty: the origin is not in the relative interior of I");
    }
  }
}

}  // namespace

Penalty::Penalty(PenaltyKind kind, ConvexSet a, ConvexSet i, Subspace s, PenaltyMeta meta)
    : kind_(kind), a_(std::move(a)), i_(std::move(i)), s_(std::move(s)), meta_(std::move(meta)) {
  require_dim(i_.dim(), a_.dim(), "Penalty: I");
  require_dim(s_.ambient_dim(), a_.dim(), "Penalty: S");
  if (!a_.bounded() || !i_.bounded()) throw InvalidSetError("Penalty: A and I must be bounded");
  if (kind_ == PenaltyKind::Custom || kind_ == PenaltyKind::Analysis) check_relint_origin(i_);
  m_ = subspace_intersect(span_of(i_).complement(), s_);
}

Penalty make_lasso(int p, IndexSet active, IndexSet free) {
  std::set<int> a(active.begin(), active.end());
  std::set<int> f(free.begin(), free.end());
  for (int i : free)
    if (a.count(i)) throw Error("make_lasso: a coordinate cannot be both active and free");
  PenaltyMeta meta;
  for (int i = 0; i < p; ++i)
    if (!a.count(i) && !f.count(i)) meta.inactive.push_back(i);
  meta.active.assign(a.begin(), a.end());
  meta.free.assign(f.begin(), f.end());
  ConvexSet aset = ConvexSet::coord_box(p, meta.active);
  ConvexSet iset = ConvexSet::coord_box(p, meta.inactive);
  return Penalty(PenaltyKind::Lasso, std::move(aset), std::move(iset), Subspace::full(p),
                 std::move(meta));
}

Penalty make_group_lasso(int p, std::vector<IndexSet> groups, IndexSet active,
                         const GroupLassoOptions& opts) {
  std::vector<int> count(p, 0);
  bool overlap = false;
  for (const auto& g : groups)
    for (int i : g) {
      if (i < 0 || i >= p) throw InvalidSetError("make_group_lasso: index out of range");
      if (++count[i] > 1) overlap = true;
    }
  if (overlap && !opts.duplicate_overlaps) {
    throw InvalidSetError(
        "make_group_lasso: groups overlap; duplicate the parameters in overlapping groups "
        "(set duplicate_overlaps) so equality constraints enter the subspace S");
  }

  Subspace s = opts.subspace_basis ? Subspace::span(*opts.subspace_basis) : Subspace::full(p);
  if (s.ambient_dim() != p) throw DimensionError("make_group_lasso: subspace basis rows");

  PenaltyMeta meta;
  int dim = p;
  if (overlap) {
    std::vector<std::pair<int, int>> copies;  // (expanded index, original index)
    std::vector<IndexSet> expanded_groups;
    for (const auto& g : groups) {
      IndexSet eg;
      for (int i : g) {
        eg.push_back(static_cast<int>(copies.size()));
        copies.emplace_back(static_cast<int>(copies.size()), i);
      }
      expanded_groups.push_back(std::move(eg));
    }
    for (int i = 0; i < p; ++i)
      if (count[i] == 0) copies.emplace_back(static_cast<int>(copies.size()), i);
    dim = static_cast<int>(copies.size());
    Matrix e = Matrix::Zero(dim, p);
    for (const auto& [k, i] : copies) e(k, i) = 1.0;
    s = Subspace::span(e * s.basis());
    groups = std::move(expanded_groups);
    meta.expansion = std::move(e);
  }

  std::set<int> act(active.begin(), active.end());
  for (int g : act)
    if (g < 0 || g >= static_cast<int>(groups.size()))
      throw InvalidSetError("make_group_lasso: active group id out of range");
  std::vector<char> grouped(dim, 0);
  for (int g = 0; g < static_cast<int>(groups.size()); ++g) {
    (act.count(g) ? meta.active : meta.inactive).push_back(g);
    for (int i : groups[g]) grouped[i] = 1;
  }
  for (int i = 0; i < dim; ++i)
    if (!grouped[i]) meta.free.push_back(i);
  meta.groups = groups;
  ConvexSet aset = ConvexSet::group_ball(dim, groups, meta.active);
  ConvexSet iset = ConvexSet::group_ball(dim, groups, meta.inactive);
  return Penalty(PenaltyKind::GroupLasso, std::move(aset), std::move(iset), std::move(s),
                 std::move(meta));
}

Penalty make_analysis(const Matrix& d, const Penalty& base) {
  if (d.rows() == 0) throw Error("make_analysis: D has no rows");
  if (d.rows() != base.dim())
    throw DimensionError("make_analysis: rows of D must match the base penalty dimension");
  PenaltyMeta meta;
  meta.D = d;
  meta.base = std::make_shared<const Penalty>(base);
  const Matrix dt = d.transpose();
  Subspace s = base.S().is_full()
                   ? Subspace::full(static_cast<int>(d.cols()))
                   : Subspace::null_space(base.S().complement().basis().transpose() * d);
  return Penalty(PenaltyKind::Analysis, ConvexSet::linear_image(dt, base.A()),
                 ConvexSet::linear_image(dt, base.I()), std::move(s), std::move(meta));
}

Penalty make_hybrid(const Penalty& first, const Penalty& second) {
  require_dim(second.dim(), first.dim(), "make_hybrid");
  const int p = first.dim();
  Matrix e1 = Matrix::Zero(2 * p, p);
  Matrix e2 = Matrix::Zero(2 * p, p);
  e1.topRows(p).setIdentity();
  e2.bottomRows(p).setIdentity();
  ConvexSet a = ConvexSet::minkowski(
      {ConvexSet::linear_image(e1, first.A()), ConvexSet::linear_image(e2, second.A())});
  ConvexSet i = ConvexSet::minkowski(
      {ConvexSet::linear_image(e1, first.I()), ConvexSet::linear_image(e2, second.I())});
  Matrix sb = Matrix::Zero(2 * p, first.S().dim() + second.S().dim());
  sb.topLeftCorner(p, first.S().dim()) = first.S().basis();
  sb.bottomRightCorner(p, second.S().dim()) = second.S().basis();
  PenaltyMeta meta;
  meta.first = std::make_shared<const Penalty>(first);
  meta.second = std::make_shared<const Penalty>(second);
  return Penalty(PenaltyKind::Hybrid, std::move(a), std::move(i), Subspace::span(sb),
                 std::move(meta));
}

Penalty make_custom(ConvexSet a, ConvexSet i, Subspace s) {
  return Penalty(PenaltyKind::Custom, std::move(a), std::move(i), std::move(s));
}

Penalty make_penalty(const PenaltySpec& spec) {
  switch (spec.kind) {
    case PenaltyKind::Lasso:
      return make_lasso(spec.p, spec.active, spec.free);
    case PenaltyKind::GroupLasso: {
      GroupLassoOptions opts;
      opts.subspace_basis = spec.subspace_basis;
      opts.duplicate_overlaps = spec.duplicate_overlaps;
      return make_group_lasso(spec.p, spec.groups, spec.active, opts);
    }
    case PenaltyKind::Analysis:
      if (!spec.base) throw Error("make_penalty: analysis penalty needs a base");
      return make_analysis(spec.D, make_penalty(*spec.base));
    case PenaltyKind::Hybrid:
      if (!spec.first || !spec.second) throw Error("make_penalty: hybrid needs two parts");
      return make_hybrid(make_penalty(*spec.first), make_penalty(*spec.second));
    case PenaltyKind::Custom:
      break;
  }
  throw UnsupportedError("make_penalty: custom penalties are built with make_custom");
}

ExtReal penalty_value(const Penalty& rho, const Vector& theta) {
  require_dim(theta.size(), rho.dim(), "penalty_value");
  if (!rho.S().contains(theta)) return ExtReal::infinite();
  return support_value(rho.A(), theta) + support_value(rho.I(), theta);
}

Subspace model_subspace(const Penalty& rho) { return rho.M(); }

std::optional<SeparableStructure> separable_structure(const Penalty& rho) {
  if (!rho.S().is_full()) return std::nullopt;
  const int p = rho.dim();
  SeparableStructure out;
  std::vector<char> used(p, 0);

  auto selected = [&](const Matrix& map, IndexSet& coords) {
    for (Eigen::Index c = 0; c < map.cols(); ++c) {
      int hit = -1;
      for (Eigen::Index r = 0; r < map.rows(); ++r) {
        const double v = map(r, c);
        if (v == 0.0) continue;
        if (v != 1.0 || hit >= 0) return false;
        hit = static_cast<int>(r);
      }
      if (hit < 0 || used[hit]) return false;
      used[hit] = 1;
      coords.push_back(hit);
    }
    return true;
  };

  for (const ConvexSet* set : {&rho.A(), &rho.I()}) {
    for (const auto& part : lift(*set).parts) {
      IndexSet coords;
      if (!selected(part.map, coords)) return std::nullopt;
      if (part.kind == BaseKind::Box) {
        out.l1.insert(out.l1.end(), coords.begin(), coords.end());
      } else if (part.kind == BaseKind::BallProduct) {
        for (const auto& g : part.groups) {
          IndexSet gg;
          for (int i : g) gg.push_back(coords[i]);
          out.groups.push_back(std::move(gg));
        }
      } else {
        return std::nullopt;
      }
    }
  }
  for (int i = 0; i < p; ++i)
    if (!used[i]) out.free.push_back(i);
  std::sort(out.l1.begin(), out.l1.end());
  return out;
}

Vector prox(const SeparableStructure& sep, const Vector& v, double t) {
  Vector out = v;
  for (int i : sep.l1) {
    const double a = std::abs(v[i]) - t;
    out[i] = a > 0.0 ? std::copysign(a, v[i]) : 0.0;
  }
  for (const auto& g : sep.groups) {
    double sq = 0.0;
    for (int i : g) sq += v[i] * v[i];
    const double nrm = std::sqrt(sq);
    const double scale = nrm > t ? 1.0 - t / nrm : 0.0;
    for (int i : g) out[i] = scale * v[i];
  }
  return out;
}

Vector prox(const Penalty& rho, const Vector& v, double t) {
  require_dim(v.size(), rho.dim(), "prox");
  if (t < 0.0) throw Error("prox: step must be nonnegative");
  const auto sep = separable_structure(rho);
  if (!sep) throw UnsupportedError("prox: penalty is not separable; use the ADMM path");
  return prox(*sep, v, t);
}

EstimandSpec EstimandSpec::from_theta(const Vector& theta, std::vector<IndexSet> groups,
                                      double threshold) {
  EstimandSpec e;
  e.p = static_cast<int>(theta.size());
  e.theta_star = theta;
  e.groups = std::move(groups);
  if (e.grouped()) {
    for (int g = 0; g < static_cast<int>(e.groups.size()); ++g) {
      double sq = 0.0;
      for (int i : e.groups[g]) sq += theta[i] * theta[i];
      if (std::sqrt(sq) > threshold) e.active.push_back(g);
    }
  } else {
    for (int i = 0; i < e.p; ++i)
      if (std::abs(theta[i]) > threshold) e.active.push_back(i);
  }
  return e;
}

void EstimandSpec::validate(double threshold) const {
  if (!theta_star) return;
  const EstimandSpec derived = from_theta(*theta_star, groups, threshold);
  if (derived.active != active)
    throw Error("EstimandSpec: support of theta_star does not match the active set");
}

}  // namespace gdpen
