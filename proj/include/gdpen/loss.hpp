#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "gdpen/core.hpp"

namespace gdpen {

enum class LossKind { Squared, ExpFamily, LogDet, Composed };

const char* to_string(LossKind kind);

/// Smooth empirical loss l^(n) on R^dim.
class Loss {
 public:
  virtual ~Loss() = default;

  virtual LossKind kind() const = 0;
  virtual int dim() const = 0;
  virtual int samples() const = 0;

  /// Value and (optionally) gradient. Throws DomainError outside the domain.
  virtual double eval(const Vector& theta, Vector* grad) const = 0;
  virtual Matrix hessian(const Vector& theta) const = 0;
  virtual bool in_domain(const Vector&) const { return true; }
  /// True when the Hessian does not depend on theta.
  virtual bool quadratic() const { return false; }
  /// Deterministic starting point for solvers (zero unless zero is outside
  /// the domain).
  virtual Vector initial_point() const { return Vector::Zero(dim()); }

  double value(const Vector& theta) const { return eval(theta, nullptr); }
  Vector gradient(const Vector& theta) const;
};

using LossPtr = std::shared_ptr<const Loss>;

struct LossEval {
  double value = 0.0;
  Vector gradient;
  std::optional<Matrix> hessian;
};

LossEval loss_eval(const Loss& loss, const Vector& theta, bool with_hessian = false);

/// (1/2n) ||y - X theta||^2, kept in Gram form.
class SquaredLoss final : public Loss {
 public:
  SquaredLoss(Matrix x, Vector y);

  LossKind kind() const override { return LossKind::Squared; }
  int dim() const override { return static_cast<int>(gram_.rows()); }
  int samples() const override { return n_; }
  double eval(const Vector& theta, Vector* grad) const override;
  Matrix hessian(const Vector&) const override { return gram_; }
  bool quadratic() const override { return true; }

  const Matrix& X() const { return x_; }
  const Vector& y() const { return y_; }
  const Matrix& gram() const { return gram_; }  // X^T X / n
  const Vector& xty() const { return xty_; }    // X^T y / n

 private:
  Matrix x_;
  Vector y_;
  Matrix gram_;
  Vector xty_;
  double yy_ = 0.0;  // y^T y / 2n
  int n_ = 0;
};

/// Log-partition function with derivatives.
struct LogPartition {
  std::string name;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;
  bool quadratic = false;
};

LogPartition gaussian_log_partition();   // 0.5 ||theta||^2
LogPartition bernoulli_log_partition();  // sum log(1 + e^theta_i)
LogPartition poisson_log_partition();    // sum e^theta_i

/// A(theta) - theta^T phi_bar: negative log-likelihood of an exponential
/// family with sufficient-statistic sample mean phi_bar.
class ExpFamilyLoss final : public Loss {
 public:
  ExpFamilyLoss(Vector phi_bar, LogPartition a, int n);

  LossKind kind() const override { return LossKind::ExpFamily; }
  int dim() const override { return static_cast<int>(phi_bar_.size()); }
  int samples() const override { return n_; }
  double eval(const Vector& theta, Vector* grad) const override;
  Matrix hessian(const Vector& theta) const override { return a_.hessian(theta); }
  bool quadratic() const override { return a_.quadratic; }

  const Vector& phi_bar() const { return phi_bar_; }
  const LogPartition& log_partition() const { return a_; }

 private:
  Vector phi_bar_;
  LogPartition a_;
  int n_ = 0;
};

/// trace(Sigma_hat Theta) - log det Theta, parameterized by the upper
/// triangle of Theta (row-major, diagonal included).
class LogDetLoss final : public Loss {
 public:
  LogDetLoss(Matrix sigma_hat, int n);

  LossKind kind() const override { return LossKind::LogDet; }
  int dim() const override { return d_ * (d_ + 1) / 2; }
  int samples() const override { return n_; }
  double eval(const Vector& theta, Vector* grad) const override;
  Matrix hessian(const Vector& theta) const override;
  bool in_domain(const Vector& theta) const override;
  Vector initial_point() const override;

  int matrix_dim() const { return d_; }
  const Matrix& sigma_hat() const { return sigma_; }

  Matrix to_matrix(const Vector& theta) const;
  Vector from_matrix(const Matrix& m) const;
  int index(int i, int j) const;  // parameter index of entry (min, max)

  /// Off-diagonal node-pair blocks (node u < v, block size b) as groups, and
  /// the diagonal-block parameters that stay unpenalized.
  static std::vector<IndexSet> block_groups(int nodes, int b);
  static IndexSet diagonal_block_params(int nodes, int b);

 private:
  Matrix sigma_;
  int d_ = 0;
  int n_ = 0;
};

/// l(G w): used for restricted problems (G = basis of M), hybrid penalties
/// (G = [I I]) and duplicated overlapping groups.
class ComposedLoss final : public Loss {
 public:
  ComposedLoss(LossPtr base, Matrix g);

  LossKind kind() const override { return LossKind::Composed; }
  int dim() const override { return static_cast<int>(g_.cols()); }
  int samples() const override { return base_->samples(); }
  double eval(const Vector& w, Vector* grad) const override;
  Matrix hessian(const Vector& w) const override;
  bool in_domain(const Vector& w) const override { return base_->in_domain(g_ * w); }
  bool quadratic() const override { return base_->quadratic(); }
  Vector initial_point() const override;

  const Loss& base() const { return *base_; }
  const Matrix& map() const { return g_; }

 private:
  LossPtr base_;
  Matrix g_;
};

}  // namespace gdpen
