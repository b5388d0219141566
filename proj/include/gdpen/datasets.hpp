#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "gdpen/loss.hpp"
#include "gdpen/penalty.hpp"

namespace gdpen {

enum class Design { GaussianIid, Correlated };

struct LinearSpec {
  int p = 10;
  int s = 2;
  int n = 100;
  double sigma = 0.5;
  Design design = Design::GaussianIid;
  double rho_corr = 0.0;             // Toeplitz rho^|i-j| for Correlated
  std::optional<Matrix> covariance;  // overrides `design` when set
  std::optional<Vector> theta_star;  // overrides the random truth when set
  double theta_min = 1.0;
  double theta_max = 1.0;            // magnitudes uniform in [theta_min, theta_max]
};

struct LinearDataset {
  Matrix X;  // columns scaled to norm sqrt(n)
  Vector y;
  Vector noise;
  Vector theta_star;
  EstimandSpec estimand;
  std::shared_ptr<const SquaredLoss> loss;
};

LinearDataset gen_linear(const LinearSpec& spec, std::uint64_t seed);

enum class Graph { Chain, Grid };

const char* to_string(Graph g);

struct BlockPrecisionSpec {
  int nodes = 16;
  int block_size = 2;
  Graph graph = Graph::Chain;
  double delta = 1.0;        // diagonal blocks delta * I
  double edge_weight = 0.2;  // edge blocks edge_weight * delta * I_b
  int n = 100;
};

struct BlockPrecisionDataset {
  Matrix theta_star_matrix;
  Matrix sigma_hat;
  std::shared_ptr<const LogDetLoss> loss;
  std::vector<IndexSet> groups;  // node-pair blocks in parameter coordinates
  IndexSet free;                 // diagonal-block parameters
  EstimandSpec estimand;         // active = edge groups
  double min_eigenvalue = 0.0;
  int edges = 0;
};

/// Node pairs (u < v) joined by an edge.
std::vector<std::pair<int, int>> graph_edges(Graph g, int nodes);

Matrix block_precision(const BlockPrecisionSpec& spec);
BlockPrecisionDataset gen_block_precision(const BlockPrecisionSpec& spec, std::uint64_t seed);

/// Success: the estimated units (coordinates or groups with magnitude above
/// eps_supp) equal the true active set; coordinate penalties additionally
/// require sign agreement on the active set.
bool success_indicator(const Vector& theta_hat, const EstimandSpec& spec, double eps_supp = 1e-6);

}  // namespace gdpen
