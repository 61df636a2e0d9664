#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "pencil/errors.hpp"

namespace pencil {

/// Probabilities are clamped to [kProbEps, 1] before any log.
inline constexpr double kProbEps = 1e-12;

/// Unconstrained real vector over classes. All components finite.
class LogitVector {
public:
  LogitVector() = default;
  /// Throws InvalidInputError if any component is NaN or infinite.
  explicit LogitVector(std::vector<double> values);

  static LogitVector zeros(std::size_t n) { return LogitVector(std::vector<double>(n, 0.0)); }

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }
  std::span<const double> span() const { return values_; }

private:
  std::vector<double> values_;
};

/// Distribution over classes: components in [kProbEps, 1], sum within 1e-9 of 1.
class ProbVector {
public:
  ProbVector() = default;
  /// Clamps components into [kProbEps, 1], then validates the sum.
  explicit ProbVector(std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }
  std::span<const double> span() const { return values_; }

private:
  std::vector<double> values_;
};

/// Numerically stable softmax (max subtraction). Input length must be >= 2.
ProbVector softmax(const LogitVector& z);
ProbVector softmax(std::span<const double> z);

/// log(max(p, kProbEps)); p must be >= 0.
double clamped_log(double p);

/// -sum_j p_j log p_j, in [0, log c].
double entropy(const ProbVector& p);

/// Central differences (fn(z + h e_j) - fn(z - h e_j)) / (2h) per component.
/// Test oracle; throws OracleFailureError if fn evaluates to a non-finite value.
LogitVector finite_diff_grad(const std::function<double(const LogitVector&)>& fn,
                             const LogitVector& z, double h = 1e-5);

/// Index of the maximum component; ties broken by lowest index.
std::size_t argmax_tiebreak(std::span<const double> v);

}  // namespace pencil
