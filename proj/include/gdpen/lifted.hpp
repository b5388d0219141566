#pragma once

// Lifted form of a convex set: C = sum_j L_j B_j with each B_j a
// projection-friendly base set. Every ConvexSet variant flattens into this
// form, which gives
//   h_C(x) = sum_j h_{B_j}(L_j^T x)
// and turns membership into a feasibility problem between a product of
// simple sets and an affine subspace.

#include <random>

#include "gdpen/geometry.hpp"

namespace gdpen {

enum class BaseKind {
  Box,          // unit l_inf ball in R^d
  BallProduct,  // product of unit l_2 balls over a partition of R^d
  Simplex,      // probability simplex in R^d
  Whole,        // all of R^d (a cone; never scaled)
};

struct BasePart {
  BaseKind kind = BaseKind::Box;
  Matrix map;                     // ambient x d
  std::vector<IndexSet> groups;   // BallProduct only, local indices

  int dim() const { return static_cast<int>(map.cols()); }
  bool scaled() const { return kind != BaseKind::Whole; }
};

struct LiftedSet {
  int ambient = 0;
  std::vector<BasePart> parts;

  int lifted_dim() const;
  bool polyhedral() const;
};

LiftedSet lift(const ConvexSet& set);

/// h_B(v) for a base part in local coordinates.
ExtReal base_support(const BasePart& part, const Vector& v);

/// Euclidean projection onto t * B (t ignored for Whole).
Vector base_project(const BasePart& part, const Vector& v, double t);

/// argmax_{y in B} <s, y>; Whole parts are not allowed.
Vector base_lmo(const BasePart& part, const Vector& s);

ExtReal lifted_support(const LiftedSet& set, const Vector& x);

/// Simplex projection: argmin ||y - v|| over {y >= 0, sum y = radius}.
Vector project_simplex(const Vector& v, double radius);

enum class Feasibility { Feasible, Infeasible, Unknown };

struct FeasibilityResult {
  Feasibility status = Feasibility::Unknown;
  std::vector<Vector> blocks;  // a feasible point per part when Feasible
  Vector certificate;          // x with x^T h > sum_j t h_{B_j}(G_j^T x) when Infeasible
  double gap = 0.0;
  int iterations = 0;
};

/// Finds y = (y_j) with y_j in t * B_j (Whole parts unscaled) and
/// sum_j G_j y_j = h, where G_j = row_map * L_j. Alternating projections
/// between the product set and the affine set; Infeasible is only reported
/// together with a separating certificate.
class FeasibilitySolver {
 public:
  FeasibilitySolver(std::vector<BasePart> parts, const Matrix& row_map);

  FeasibilityResult solve(const Vector& h, double t, double tol = 1e-9,
                          int max_iter = 10000) const;

  const std::vector<BasePart>& parts() const { return parts_; }
  /// sum_j t h_{B_j}(G_j^T x), +inf when a Whole part sees a nonzero.
  ExtReal dual_value(const Vector& x, double t) const;
  /// Scaled and fixed parts of the dual value separately.
  void dual_split(const Vector& x, ExtReal& scaled, ExtReal& fixed) const;
  Vector combine(const std::vector<Vector>& blocks) const;  // sum_j L_j y_j (ambient)

 private:
  std::vector<BasePart> parts_;
  std::vector<Matrix> g_blocks_;   // G_j = row_map * L_j
  std::vector<int> offsets_;
  Matrix g_;                       // r x D
  Matrix g_pinv_;                  // D x r
  Matrix gg_pinv_;                 // r x r, (G G^T)^+
  Matrix range_proj_;              // r x r, G G^+
  Matrix whole_null_;              // r x q, basis of {x : G_j^T x = 0 for Whole j}
  bool has_whole_ = false;
};

struct ScaledGauge {
  ExtReal value;
  Interval bracket;
  bool converged = true;
  std::vector<Vector> blocks;  // feasible decomposition at bracket.hi
  Vector dual;                 // best separating direction seen (may be empty)
};

/// inf{ t >= 0 : z in t * (scaled parts) + (Whole parts) } by bisection with
/// certificate-driven lower bounds.
ScaledGauge scaled_gauge(const FeasibilitySolver& solver, const Vector& z,
                         double rel_tol = 1e-10);

}  // namespace gdpen
