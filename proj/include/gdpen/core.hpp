#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace gdpen {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IndexSet = std::vector<int>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class InvalidSetError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

/// Extended real value: a finite number or +inf, with the flag kept explicit
/// so callers never have to test against the infinity constant.
struct ExtReal {
  double value = 0.0;
  bool unbounded = false;

  static ExtReal finite(double v) { return {v, false}; }
  static ExtReal infinite() { return {kInf, true}; }

  ExtReal& operator+=(const ExtReal& o) {
    if (unbounded || o.unbounded) {
      *this = infinite();
    } else {
      value += o.value;
    }
    return *this;
  }
};

inline ExtReal operator+(ExtReal a, const ExtReal& b) { return a += b; }

/// Closed interval [lo, hi]; hi may be +inf.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return lo <= x && x <= hi; }
  bool empty() const { return lo > hi; }
};

inline void require_dim(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": dimension " +
                         std::to_string(got) + " does not match " +
                         std::to_string(want));
  }
}

}  // namespace gdpen
