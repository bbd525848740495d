#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace segdyn {

/// A point of the phase space, d real coordinates.
using StateVector = std::vector<double>;

/// Partition cells and cover balls are numbered 1..N.
using CellId = int;

/// A finite symbol word n_0 n_1 ... over cell ids.
using Word = std::vector<CellId>;

/// Base of all library errors. The CLI maps the subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: shapes, ranges, malformed documents.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: blow-up, failed calibration, exhausted sampling budgets.
class NumericsError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage was asked to run before the artifact it consumes exists.
class MissingArtifactError : public Error {
 public:
  using Error::Error;
};

inline double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline double norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

/// Neumaier-compensated running sum; entropy sums over many small terms
/// otherwise drift by a few ulps per term.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    comp_ += std::abs(sum_) >= std::abs(v) ? (sum_ - t) + v : (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline bool all_finite(std::span<const double> a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace segdyn
