#include "gdpen/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace gdpen {

const char* to_string(Graph g) { return g == Graph::Chain ? "chain" : "grid"; }

namespace {

Matrix standard_normal(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = nd(rng);
  return m;
}

Matrix design_covariance(const LinearSpec& spec) {
  if (spec.covariance) {
    require_dim(spec.covariance->rows(), spec.p, "gen_linear: covariance");
    return *spec.covariance;
  }
  Matrix c = Matrix::Identity(spec.p, spec.p);
  if (spec.design == Design::Correlated)
    for (int i = 0; i < spec.p; ++i)
      for (int j = 0; j < spec.p; ++j) c(i, j) = std::pow(spec.rho_corr, std::abs(i - j));
  return c;
}

}  // namespace

LinearDataset gen_linear(const LinearSpec& spec, std::uint64_t seed) {
  if (spec.p < 1 || spec.n < 1) throw Error("gen_linear: p and n must be positive");
  if (spec.s < 0 || spec.s > spec.p) throw Error("gen_linear: sparsity out of range");
  std::mt19937_64 rng(seed);
  LinearDataset ds;

  Matrix x = standard_normal(spec.n, spec.p, rng);
  const bool iid = !spec.covariance && spec.design == Design::GaussianIid;
  if (!iid) {
    const Matrix cov = design_covariance(spec);
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) throw DomainError("gen_linear: design covariance is not PD");
    x = x * llt.matrixU().toDenseMatrix();
  }
  const double target = std::sqrt(static_cast<double>(spec.n));
  for (int j = 0; j < spec.p; ++j) {
    const double nrm = x.col(j).norm();
    if (nrm > 0.0) x.col(j) *= target / nrm;
  }

  Vector theta = Vector::Zero(spec.p);
  if (spec.theta_star) {
    require_dim(spec.theta_star->size(), spec.p, "gen_linear: theta_star");
    theta = *spec.theta_star;
  } else {
    std::vector<int> idx(spec.p);
    std::iota(idx.begin(), idx.end(), 0);
    for (int k = 0; k < spec.s; ++k) {
      std::uniform_int_distribution<int> pick(k, spec.p - 1);
      std::swap(idx[k], idx[pick(rng)]);
    }
    std::uniform_real_distribution<double> mag(spec.theta_min, std::max(spec.theta_min, spec.theta_max));
    std::bernoulli_distribution coin(0.5);
    for (int k = 0; k < spec.s; ++k) {
      const double m = spec.theta_max > spec.theta_min ? mag(rng) : spec.theta_min;
      theta[idx[k]] = coin(rng) ? m : -m;
    }
  }

  std::normal_distribution<double> nd(0.0, 1.0);
  Vector eps(spec.n);
  for (int i = 0; i < spec.n; ++i) eps[i] = spec.sigma * nd(rng);

  ds.y = x * theta + eps;
  ds.noise = eps;
  ds.X = std::move(x);
  ds.theta_star = theta;
  ds.estimand = EstimandSpec::from_theta(theta);
  ds.loss = std::make_shared<SquaredLoss>(ds.X, ds.y);
  return ds;
}

std::vector<std::pair<int, int>> graph_edges(Graph g, int nodes) {
  std::vector<std::pair<int, int>> edges;
  if (g == Graph::Chain) {
    for (int u = 0; u + 1 < nodes; ++u) edges.emplace_back(u, u + 1);
    return edges;
  }
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(nodes))));
  if (side * side != nodes) throw Error("graph_edges: grid graphs need a square node count");
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) {
      const int u = r * side + c;
      if (c + 1 < side) edges.emplace_back(u, u + 1);
      if (r + 1 < side) edges.emplace_back(u, u + side);
    }
  std::sort(edges.begin(), edges.end());
  return edges;
}

Matrix block_precision(const BlockPrecisionSpec& spec) {
  if (spec.nodes < 1 || spec.block_size < 1) throw Error("block_precision: empty graph");
  const int b = spec.block_size;
  const int d = spec.nodes * b;
  Matrix t = spec.delta * Matrix::Identity(d, d);
  for (const auto& [u, v] : graph_edges(spec.graph, spec.nodes)) {
    t.block(u * b, v * b, b, b) = spec.edge_weight * spec.delta * Matrix::Identity(b, b);
    t.block(v * b, u * b, b, b) = spec.edge_weight * spec.delta * Matrix::Identity(b, b);
  }
  const double min_eig = Eigen::SelfAdjointEigenSolver<Matrix>(t, Eigen::EigenvaluesOnly)
                             .eigenvalues()
                             .minCoeff();
  if (min_eig < 0.1 - 1e-9) {
    throw DomainError(std::string("block_precision: ") + to_string(spec.graph) + " graph with " +
                      std::to_string(spec.nodes) + " nodes and edge weight " +
                      std::to_string(spec.edge_weight) + " has min eigenvalue " +
                      std::to_string(min_eig) + " < 0.1");
  }
  return t;
}

BlockPrecisionDataset gen_block_precision(const BlockPrecisionSpec& spec, std::uint64_t seed) {
  BlockPrecisionDataset ds;
  ds.theta_star_matrix = block_precision(spec);
  const Matrix& t = ds.theta_star_matrix;
  const int d = static_cast<int>(t.rows());
  ds.min_eigenvalue = Eigen::SelfAdjointEigenSolver<Matrix>(t, Eigen::EigenvaluesOnly)
                          .eigenvalues()
                          .minCoeff();

  // x = L^{-T} z has covariance (L L^T)^{-1} = Theta^{-1}.
  Eigen::LLT<Matrix> llt(t);
  std::mt19937_64 rng(seed);
  const Matrix z = standard_normal(spec.n, d, rng);
  const Matrix xs = llt.matrixU().solve(z.transpose()).transpose();  // n x d
  ds.sigma_hat = (xs.transpose() * xs) / static_cast<double>(spec.n);
  ds.sigma_hat = 0.5 * (ds.sigma_hat + ds.sigma_hat.transpose()).eval();

  ds.loss = std::make_shared<LogDetLoss>(ds.sigma_hat, spec.n);
  ds.groups = LogDetLoss::block_groups(spec.nodes, spec.block_size);
  ds.free = LogDetLoss::diagonal_block_params(spec.nodes, spec.block_size);
  const Vector theta = ds.loss->from_matrix(t);
  ds.estimand = EstimandSpec::from_theta(theta, ds.groups);
  ds.edges = static_cast<int>(graph_edges(spec.graph, spec.nodes).size());
  return ds;
}

bool success_indicator(const Vector& theta_hat, const EstimandSpec& spec, double eps_supp) {
  require_dim(theta_hat.size(), spec.p, "success_indicator");
  if (spec.grouped()) {
    IndexSet est;
    for (int g = 0; g < static_cast<int>(spec.groups.size()); ++g) {
      double sq = 0.0;
      for (int i : spec.groups[g]) sq += theta_hat[i] * theta_hat[i];
      if (std::sqrt(sq) > eps_supp) est.push_back(g);
    }
    return est == spec.active;
  }
  IndexSet est;
  for (int i = 0; i < spec.p; ++i)
    if (std::abs(theta_hat[i]) > eps_supp) est.push_back(i);
  if (est != spec.active) return false;
  if (spec.theta_star)
    for (int i : spec.active)
      if ((theta_hat[i] > 0) != ((*spec.theta_star)[i] > 0)) return false;
  return true;
}

}  // namespace gdpen
