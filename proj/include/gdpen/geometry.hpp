#pragma once

#include <memory>
#include <optional>
#include <random>
#include <variant>

#include "gdpen/core.hpp"

namespace gdpen {

/// Linear subspace of R^p held as a column-orthonormal basis.
class Subspace {
 public:
  Subspace() = default;

  /// Span of arbitrary columns; directions with singular value below
  /// `rel_tol` times the largest are dropped.
  static Subspace span(const Matrix& columns, double rel_tol = 1e-10);
  static Subspace full(int ambient);
  static Subspace zero(int ambient);
  static Subspace coordinates(int ambient, const IndexSet& coords);
  /// Null space of `rows` (a matrix acting on R^p from the left).
  static Subspace null_space(const Matrix& rows, double rel_tol = 1e-10);

  int ambient_dim() const { return ambient_; }
  int dim() const { return static_cast<int>(basis_.cols()); }
  const Matrix& basis() const { return basis_; }
  bool is_full() const { return dim() == ambient_; }

  Matrix projector() const { return basis_ * basis_.transpose(); }
  Subspace complement() const;
  bool contains(const Vector& x, double tol = 1e-10) const;

  /// When the subspace is spanned by coordinate axes, returns those axes.
  std::optional<IndexSet> coordinate_support(double tol = 1e-10) const;

 private:
  Subspace(Matrix basis, int ambient) : basis_(std::move(basis)), ambient_(ambient) {}

  Matrix basis_;
  int ambient_ = 0;
};

class ConvexSet;
using ConvexSetPtr = std::shared_ptr<const ConvexSet>;

/// conv{atoms}, atoms stored as columns.
struct AtomPolytope {
  Matrix atoms;
};

/// {x : |x_i| <= 1 for i in coords, x_j = 0 otherwise}.
struct CoordBox {
  int dim = 0;
  IndexSet coords;
};

/// {x : ||x_g||_2 <= 1 for g in active, x_j = 0 off the active groups}.
struct GroupBall {
  int dim = 0;
  std::vector<IndexSet> groups;
  IndexSet active;
};

/// map * base, with map of size dim x base.dim (D^T for analysis penalties).
struct LinearImage {
  Matrix map;
  ConvexSetPtr base;
};

struct MinkowskiSum {
  std::vector<ConvexSetPtr> parts;
};

/// The subspace itself; its support function is the indicator of the
/// orthogonal complement.
struct SubspaceSet {
  Subspace subspace;
};

/// Finite symbolic description of a closed convex set.
class ConvexSet {
 public:
  using Rep = std::variant<AtomPolytope, CoordBox, GroupBall, LinearImage,
                           MinkowskiSum, SubspaceSet>;

  static ConvexSet atoms(Matrix atoms);
  static ConvexSet point(const Vector& p);
  static ConvexSet coord_box(int dim, IndexSet coords);
  static ConvexSet group_ball(int dim, std::vector<IndexSet> groups, IndexSet active);
  static ConvexSet linear_image(Matrix map, const ConvexSet& base);
  static ConvexSet minkowski(const std::vector<ConvexSet>& parts);
  static ConvexSet subspace(Subspace s);
  /// {0} in R^dim.
  static ConvexSet origin(int dim);

  int dim() const { return dim_; }
  const Rep& rep() const { return rep_; }
  bool bounded() const;

 private:
  ConvexSet(Rep rep, int dim) : rep_(std::move(rep)), dim_(dim) {}

  Rep rep_;
  int dim_ = 0;
};

/// sup{ y^T x : y in set }.
ExtReal support_value(const ConvexSet& set, const Vector& x);

struct GaugeResult {
  ExtReal value;
  Interval bracket;
  bool exact = true;      // closed form, or bisection converged
  bool converged = true;  // false when a membership test hit its cap
};

/// inf{ t >= 0 : z in t * set }. Requires the origin to lie in the set.
GaugeResult gauge_value(const ConvexSet& set, const Vector& z);

/// Exposed face { y in set : y^T x = h_set(x) }.
ConvexSet support_face(const ConvexSet& set, const Vector& x);

/// Linear span of the set.
Subspace span_of(const ConvexSet& set);

/// Membership within `tol` (alternating projections on the lifted form).
bool contains(const ConvexSet& set, const Vector& y, double tol = 1e-9);

/// A point of the set (used by property tests and samplers).
Vector sample_point(const ConvexSet& set, std::mt19937_64& rng);

Subspace subspace_intersect(const Subspace& u, const Subspace& w);
Subspace subspace_sum(const Subspace& u, const Subspace& w);

Vector project(const Subspace& u, const Vector& x);

struct PinvResult {
  Vector value;
  int rank = 0;
  bool not_psd = false;
  double min_eigenvalue = 0.0;
};

/// (P_M Q P_M)^+ x evaluated in the basis of M with a relative eigenvalue
/// cutoff tol * lambda_max.
PinvResult restricted_pinv_apply(const Matrix& q, const Subspace& m, const Vector& x,
                                 double tol = 1e-10);

/// Symmetric pseudo-inverse of basis^T Q basis, shared by the certification code.
struct RestrictedInverse {
  Matrix basis;       // p x k
  Matrix inv;         // k x k
  int rank = 0;
  bool not_psd = false;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
};
RestrictedInverse restricted_inverse(const Matrix& q, const Subspace& m, double tol = 1e-10);

}  // namespace gdpen
