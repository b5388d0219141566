#pragma once

#include <memory>
#include <optional>

#include "gdpen/geometry.hpp"

namespace gdpen {

enum class PenaltyKind { Lasso, GroupLasso, Analysis, Hybrid, Custom };

const char* to_string(PenaltyKind kind);

class Penalty;
using PenaltyPtr = std::shared_ptr<const Penalty>;

/// Bookkeeping that lets closed-form code paths avoid the generic machinery.
struct PenaltyMeta {
  IndexSet active;     // coordinates (lasso) or group ids (group lasso)
  IndexSet inactive;
  IndexSet free;       // unpenalized coordinates
  std::vector<IndexSet> groups;
  Matrix D;            // analysis
  PenaltyPtr base;     // analysis
  PenaltyPtr first;    // hybrid
  PenaltyPtr second;   // hybrid
  Matrix expansion;    // duplicated overlapping groups: theta_expanded = E theta
};

/// Geometrically decomposable penalty rho = h_A + h_I + h_{S^perp} with the
/// model subspace M = span(I)^perp intersect S cached at construction.
class Penalty {
 public:
  Penalty(PenaltyKind kind, ConvexSet a, ConvexSet i, Subspace s, PenaltyMeta meta = {});

  PenaltyKind kind() const { return kind_; }
  int dim() const { return a_.dim(); }
  const ConvexSet& A() const { return a_; }
  const ConvexSet& I() const { return i_; }
  const Subspace& S() const { return s_; }
  const Subspace& M() const { return m_; }
  const PenaltyMeta& meta() const { return meta_; }

 private:
  PenaltyKind kind_;
  ConvexSet a_;
  ConvexSet i_;
  Subspace s_;
  Subspace m_;
  PenaltyMeta meta_;
};

/// Lasso on R^p: A = B_inf restricted to `active`, I = B_inf restricted to the
/// remaining penalized coordinates; `free` coordinates are left unpenalized.
Penalty make_lasso(int p, IndexSet active, IndexSet free = {});

struct GroupLassoOptions {
  std::optional<Matrix> subspace_basis;  // columns spanning S; R^p when absent
  bool duplicate_overlaps = false;
};

/// Group lasso with `active` group ids; coordinates outside every group are free.
Penalty make_group_lasso(int p, std::vector<IndexSet> groups, IndexSet active,
                         const GroupLassoOptions& opts = {});

/// rho(D theta) for a decomposable base penalty on R^{rows(D)}.
Penalty make_analysis(const Matrix& d, const Penalty& base);

/// Penalty on (theta1, theta2) in R^{2p} for the infimal convolution of two
/// penalties on R^p.
Penalty make_hybrid(const Penalty& first, const Penalty& second);

Penalty make_custom(ConvexSet a, ConvexSet i, Subspace s);

/// Plain-data description used by the JSON front end.
struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::Lasso;
  int p = 0;
  IndexSet active;
  IndexSet free;
  std::vector<IndexSet> groups;
  std::optional<Matrix> subspace_basis;
  bool duplicate_overlaps = false;
  Matrix D;
  std::shared_ptr<PenaltySpec> base;
  std::shared_ptr<PenaltySpec> first;
  std::shared_ptr<PenaltySpec> second;
};

Penalty make_penalty(const PenaltySpec& spec);

ExtReal penalty_value(const Penalty& rho, const Vector& theta);

Subspace model_subspace(const Penalty& rho);

/// Coordinates penalized by l1 terms and groups penalized by l2 terms when the
/// penalty (h_A + h_I, S = R^p) is coordinate separable.
struct SeparableStructure {
  IndexSet l1;
  std::vector<IndexSet> groups;
  IndexSet free;
};

std::optional<SeparableStructure> separable_structure(const Penalty& rho);

/// argmin_theta 0.5 ||theta - v||^2 + t (h_A + h_I)(theta) for separable penalties.
Vector prox(const Penalty& rho, const Vector& v, double t);
Vector prox(const SeparableStructure& sep, const Vector& v, double t);

/// Known truth for synthetic problems.
struct EstimandSpec {
  int p = 0;
  std::optional<Vector> theta_star;
  IndexSet active;                 // coordinates, or group ids when grouped
  std::vector<IndexSet> groups;    // empty for coordinate sparsity

  bool grouped() const { return !groups.empty(); }
  static EstimandSpec from_theta(const Vector& theta, std::vector<IndexSet> groups = {},
                                 double threshold = 1e-12);
  void validate(double threshold = 1e-12) const;
};

}  // namespace gdpen
