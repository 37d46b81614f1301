#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace splinebeta {

/// Nonzero basis values at one evaluation point: functions
/// first, first+1, ..., first+values.size()-1 carry `values`; all others are 0.
struct LocalBasis {
  int first = 0;
  Eigen::VectorXd values;
};

/// Clamped B-spline system of degree d on [0, T] with uniform interior knots.
///
/// Basis functions are right-continuous on [0, T) and the last one is closed
/// at T, so every point of [0, T] sees a partition of unity. Immutable after
/// construction.
class SplineBasis {
 public:
  /// Throws InvalidArgument when basis_count < degree + 1 or horizon <= 0.
  static SplineBasis uniform(int degree, int basis_count, double horizon);

  int degree() const noexcept { return degree_; }
  int basis_count() const noexcept { return basis_count_; }
  int interior_knot_count() const noexcept { return basis_count_ - degree_ - 1; }
  double horizon() const noexcept { return horizon_; }
  std::span<const double> extended_knots() const noexcept { return knots_; }

  /// Knot span s with knots[s] <= t < knots[s+1], s in [d, K-1]; t = T maps
  /// to the last nondegenerate span.
  int find_span(double t) const;

  /// The d+1 (possibly zero) values of the functions supported on t's span.
  LocalBasis evaluate_local(double t) const;

  /// All K values at t. Throws OutOfRange outside [0, T].
  Eigen::VectorXd evaluate(double t) const;

  /// Derivative of every basis function at t (right derivative at knots).
  /// Throws InvalidArgument for d = 0.
  Eigen::VectorXd evaluate_derivative(double t) const;

  /// p x pK matrix with the basis row repeated on the block diagonal.
  Eigen::MatrixXd block_matrix(double t, int block_count) const;

 private:
  SplineBasis(int degree, int basis_count, double horizon, std::vector<double> knots);

  void check_domain(double t) const;
  // Values of the degree-`deg` functions supported on `span` (deg+1 entries).
  Eigen::VectorXd local_values(int span, double t, int deg) const;

  int degree_;
  int basis_count_;
  double horizon_;
  std::vector<double> knots_;
};

}  // namespace splinebeta
