#pragma once

#include <vector>

#include <Eigen/Dense>

#include "splinebeta/preprocess.hpp"
#include "splinebeta/spline_basis.hpp"

namespace splinebeta {

/// Truncated spline regression system.
///
/// Row i of the design is R_i = kron(x_i, b(t_{i-1})), where x_i are the
/// truncated covariate increments and b the basis at the left endpoint. The
/// design is kept in factored form: only x_i, the d+1 local basis values and
/// their first index are stored, so a row has at most p(d+1) nonzeros. Column
/// (j, k) lives at index j*K + k. Truncated rows stay in place as zeros.
struct DesignSystem {
  SplineBasis basis;
  double delta = 0.0;
  Eigen::VectorXd response;            // n, truncated
  Eigen::MatrixXd covariates;          // n x p, truncated
  Eigen::MatrixXd local;               // n x (d+1) basis values at t_{i-1}
  std::vector<int> first;              // n, index of local(i, 0)
  KeepMask mask;
  std::vector<Eigen::MatrixXd> block_grams;  // p matrices, K x K

  int row_count() const noexcept { return static_cast<int>(response.size()); }
  int block_count() const noexcept { return static_cast<int>(covariates.cols()); }
  int basis_count() const noexcept { return basis.basis_count(); }
  int width() const noexcept { return block_count() * basis_count(); }
  double horizon() const noexcept { return delta * row_count(); }
};

/// Zero the rows flagged in `drop` (response, covariates and all keep flags).
TruncatedIncrements zero_rows(const TruncatedIncrements& inc, const BoolVector& drop);

/// Throws InvalidArgument on a horizon mismatch and EmptyKeptSet when no row
/// survives truncation.
DesignSystem build_design(const TruncatedIncrements& inc, const SplineBasis& basis);
DesignSystem build_design(const PricePanel& panel, const SplineBasis& basis, const TruncationSpec& spec);

/// Stored W_j; throws OutOfRange for j outside [0, p).
const Eigen::MatrixXd& block_gram(const DesignSystem& system, int j);

/// W_j recomputed by streaming row-rank-one updates.
Eigen::MatrixXd recompute_block_gram(const DesignSystem& system, int j);

/// Dense n x pK design.
Eigen::MatrixXd dense_design(const DesignSystem& system);

/// Dense row i of the design.
Eigen::VectorXd design_row(const DesignSystem& system, int i);

/// sum_i b(t_{i-1}) * delta, the K-vector mapping a block of coefficients to
/// its Riemann-sum integral.
Eigen::VectorXd integrated_basis(const DesignSystem& system);

}  // namespace splinebeta
