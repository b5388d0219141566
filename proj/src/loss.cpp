#include "gdpen/loss.hpp"

#include <algorithm>
#include <cmath>

namespace gdpen {

const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Squared: return "squared";
    case LossKind::ExpFamily: return "expfam";
    case LossKind::LogDet: return "logdet";
    case LossKind::Composed: return "composed";
  }
  return "composed";
}

Vector Loss::gradient(const Vector& theta) const {
  Vector g;
  eval(theta, &g);
  return g;
}

LossEval loss_eval(const Loss& loss, const Vector& theta, bool with_hessian) {
  require_dim(theta.size(), loss.dim(), "loss_eval");
  LossEval out;
  out.value = loss.eval(theta, &out.gradient);
  if (with_hessian) out.hessian = loss.hessian(theta);
  return out;
}

// ---------------------------------------------------------------- squared

SquaredLoss::SquaredLoss(Matrix x, Vector y) : x_(std::move(x)), y_(std::move(y)) {
  require_dim(y_.size(), x_.rows(), "SquaredLoss: y");
  if (x_.rows() == 0) throw DimensionError("SquaredLoss: no samples");
  n_ = static_cast<int>(x_.rows());
  const double inv = 1.0 / n_;
  gram_ = inv * (x_.transpose() * x_);
  xty_ = inv * (x_.transpose() * y_);
  yy_ = 0.5 * inv * y_.squaredNorm();
}

double SquaredLoss::eval(const Vector& theta, Vector* grad) const {
  require_dim(theta.size(), dim(), "SquaredLoss");
  const Vector gt = gram_ * theta;
  if (grad) *grad = gt - xty_;
  // Clamp tiny negative values from cancellation; the loss is a square.
  return std::max(0.0, 0.5 * theta.dot(gt) - theta.dot(xty_) + yy_);
}

// ---------------------------------------------------------------- exp family

LogPartition gaussian_log_partition() {
  LogPartition a;
  a.name = "gaussian";
  a.value = [](const Vector& t) { return 0.5 * t.squaredNorm(); };
  a.gradient = [](const Vector& t) { return Vector(t); };
  a.hessian = [](const Vector& t) { return Matrix(Matrix::Identity(t.size(), t.size())); };
  a.quadratic = true;
  return a;
}

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

LogPartition bernoulli_log_partition() {
  LogPartition a;
  a.name = "bernoulli";
  a.value = [](const Vector& t) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < t.size(); ++i) s += softplus(t[i]);
    return s;
  };
  a.gradient = [](const Vector& t) { return Vector(t.unaryExpr(&sigmoid)); };
  a.hessian = [](const Vector& t) {
    Vector d(t.size());
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double s = sigmoid(t[i]);
      d[i] = s * (1.0 - s);
    }
    return Matrix(d.asDiagonal());
  };
  return a;
}

LogPartition poisson_log_partition() {
  LogPartition a;
  a.name = "poisson";
  a.value = [](const Vector& t) { return t.array().exp().sum(); };
  a.gradient = [](const Vector& t) { return Vector(t.array().exp()); };
  a.hessian = [](const Vector& t) { return Matrix(t.array().exp().matrix().asDiagonal()); };
  return a;
}

ExpFamilyLoss::ExpFamilyLoss(Vector phi_bar, LogPartition a, int n)
    : phi_bar_(std::move(phi_bar)), a_(std::move(a)), n_(n) {
  if (!a_.value || !a_.gradient || !a_.hessian)
    throw Error("ExpFamilyLoss: log-partition needs value, gradient and Hessian");
}

double ExpFamilyLoss::eval(const Vector& theta, Vector* grad) const {
  require_dim(theta.size(), dim(), "ExpFamilyLoss");
  if (grad) *grad = a_.gradient(theta) - phi_bar_;
  return a_.value(theta) - theta.dot(phi_bar_);
}

// ---------------------------------------------------------------- log det

LogDetLoss::LogDetLoss(Matrix sigma_hat, int n) : sigma_(std::move(sigma_hat)), n_(n) {
  if (sigma_.rows() != sigma_.cols()) throw DimensionError("LogDetLoss: covariance not square");
  if ((sigma_ - sigma_.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + sigma_.cwiseAbs().maxCoeff()))
    throw DomainError("LogDetLoss: covariance not symmetric");
  d_ = static_cast<int>(sigma_.rows());
}

int LogDetLoss::index(int i, int j) const {
  if (i > j) std::swap(i, j);
  // Row-major upper triangle: rows 0..i-1 contribute d, d-1, ..., d-i+1.
  return i * d_ - i * (i - 1) / 2 + (j - i);
}

Matrix LogDetLoss::to_matrix(const Vector& theta) const {
  require_dim(theta.size(), dim(), "LogDetLoss");
  Matrix m(d_, d_);
  int k = 0;
  for (int i = 0; i < d_; ++i)
    for (int j = i; j < d_; ++j, ++k) {
      m(i, j) = theta[k];
      m(j, i) = theta[k];
    }
  return m;
}

Vector LogDetLoss::from_matrix(const Matrix& m) const {
  Vector theta(dim());
  int k = 0;
  for (int i = 0; i < d_; ++i)
    for (int j = i; j < d_; ++j, ++k) theta[k] = m(i, j);
  return theta;
}

bool LogDetLoss::in_domain(const Vector& theta) const {
  Eigen::LLT<Matrix> llt(to_matrix(theta));
  if (llt.info() != Eigen::Success) return false;
  return llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0;
}

double LogDetLoss::eval(const Vector& theta, Vector* grad) const {
  const Matrix t = to_matrix(theta);
  Eigen::LLT<Matrix> llt(t);
  if (llt.info() != Eigen::Success) throw DomainError("LogDetLoss: Theta is not positive definite");
  const Matrix& l = llt.matrixLLT();
  double logdet = 0.0;
  for (int i = 0; i < d_; ++i) {
    if (!(l(i, i) > 0.0)) throw DomainError("LogDetLoss: Theta is not positive definite");
    logdet += 2.0 * std::log(l(i, i));
  }
  if (grad) {
    const Matrix w = llt.solve(Matrix::Identity(d_, d_));
    const Matrix g = sigma_ - w;
    grad->resize(dim());
    int k = 0;
    for (int i = 0; i < d_; ++i)
      for (int j = i; j < d_; ++j, ++k) {
        // Off-diagonal parameters appear twice in Theta.
        (*grad)[k] = (i == j) ? g(i, i) : g(i, j) + g(j, i);
      }
  }
  return (sigma_.cwiseProduct(t)).sum() - logdet;
}

Matrix LogDetLoss::hessian(const Vector& theta) const {
  Eigen::LLT<Matrix> llt(to_matrix(theta));
  if (llt.info() != Eigen::Success) throw DomainError("LogDetLoss: Theta is not positive definite");
  const Matrix w = llt.solve(Matrix::Identity(d_, d_));
  // d^2/da db (-log det) = tr(W E_a W E_b), E_a = sum of unit matrices e_i e_j^T
  // over the entries parameter a controls; tr(W e_i e_j^T W e_k e_l^T) = W_li W_jk.
  std::vector<std::pair<int, int>> ent;
  ent.reserve(dim());
  for (int i = 0; i < d_; ++i)
    for (int j = i; j < d_; ++j) ent.emplace_back(i, j);
  const int m = dim();
  Matrix h(m, m);
  for (int a = 0; a < m; ++a) {
    const auto [i, j] = ent[a];
    for (int b = a; b < m; ++b) {
      const auto [k, l] = ent[b];
      double v;
      if (i == j && k == l) {
        v = w(l, i) * w(j, k);
      } else if (i == j) {
        v = w(l, i) * w(j, k) + w(k, i) * w(j, l);
      } else if (k == l) {
        v = w(l, i) * w(j, k) + w(l, j) * w(i, k);
      } else {
        v = w(l, i) * w(j, k) + w(k, i) * w(j, l) + w(l, j) * w(i, k) + w(k, j) * w(i, l);
      }
      h(a, b) = v;
      h(b, a) = v;
    }
  }
  return h;
}

Vector LogDetLoss::initial_point() const {
  Matrix t = Matrix::Zero(d_, d_);
  for (int i = 0; i < d_; ++i) t(i, i) = sigma_(i, i) > 0.0 ? 1.0 / sigma_(i, i) : 1.0;
  return from_matrix(t);
}

std::vector<IndexSet> LogDetLoss::block_groups(int nodes, int b) {
  const int d = nodes * b;
  auto idx = [d](int i, int j) { return i * d - i * (i - 1) / 2 + (j - i); };
  std::vector<IndexSet> groups;
  for (int u = 0; u < nodes; ++u)
    for (int v = u + 1; v < nodes; ++v) {
      IndexSet g;
      for (int r = 0; r < b; ++r)
        for (int c = 0; c < b; ++c) g.push_back(idx(u * b + r, v * b + c));
      std::sort(g.begin(), g.end());
      groups.push_back(std::move(g));
    }
  return groups;
}

IndexSet LogDetLoss::diagonal_block_params(int nodes, int b) {
  const int d = nodes * b;
  auto idx = [d](int i, int j) { return i * d - i * (i - 1) / 2 + (j - i); };
  IndexSet out;
  for (int u = 0; u < nodes; ++u)
    for (int r = 0; r < b; ++r)
      for (int c = r; c < b; ++c) out.push_back(idx(u * b + r, u * b + c));
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------- composed

ComposedLoss::ComposedLoss(LossPtr base, Matrix g) : base_(std::move(base)), g_(std::move(g)) {
  if (!base_) throw Error("ComposedLoss: null base loss");
  require_dim(g_.rows(), base_->dim(), "ComposedLoss: map rows");
}

double ComposedLoss::eval(const Vector& w, Vector* grad) const {
  require_dim(w.size(), dim(), "ComposedLoss");
  if (!grad) return base_->eval(g_ * w, nullptr);
  Vector gb;
  const double v = base_->eval(g_ * w, &gb);
  *grad = g_.transpose() * gb;
  return v;
}

Matrix ComposedLoss::hessian(const Vector& w) const {
  return g_.transpose() * base_->hessian(g_ * w) * g_;
}

Vector ComposedLoss::initial_point() const {
  const Vector t0 = base_->initial_point();
  if (t0.isZero(0.0)) return Vector::Zero(dim());
  return g_.completeOrthogonalDecomposition().solve(t0);
}

}  // namespace gdpen
