#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "splinebeta/design.hpp"

namespace splinebeta {

/// Reciprocal-condition floor below which R^T R is treated as singular.
inline constexpr double kSingularRcond = 1e-12;

struct FitResult {
  Eigen::VectorXd gamma_hat;  // pK, block j at j*K
  SplineBasis basis;
  int block_count = 0;
  int interval_count = 0;
  double delta = 0.0;
  Eigen::VectorXd integrated_beta;            // p
  std::optional<Eigen::MatrixXd> covariance;  // p x p
  Eigen::VectorXd residuals;                  // n
  double condition_diagnostic = 0.0;          // reciprocal condition of R^T R
};

/// gamma = (R^T R)^{-1} R^T Y via Cholesky. Throws SingularError when the
/// reciprocal condition estimate falls below kSingularRcond.
FitResult fit_ols(const DesignSystem& system);

/// Minimum-norm least-squares solution gamma = R^T (R R^T)^+ Y. Defined in the
/// rank-deficient regime where fit_ols refuses to solve; the covariance is
/// never set.
FitResult fit_min_norm(const DesignSystem& system);

/// Package an externally computed coefficient vector as a FitResult.
FitResult make_fit(const DesignSystem& system, Eigen::VectorXd gamma);

/// B_t * gamma_hat. Throws OutOfRange outside [0, T].
Eigen::VectorXd beta_path(const FitResult& fit, double t);

/// sum_{i=1}^n beta_{(i-1) delta} * delta.
Eigen::VectorXd integrated_beta(const FitResult& fit, int n, double delta);

/// Leave-one-out residuals e_i / (1 - h_ii) and leverages of the OLS fit.
struct LooResiduals {
  Eigen::VectorXd leverage;
  Eigen::VectorXd residual;
};
LooResiduals loo_residuals(const DesignSystem& system, const FitResult& fit);

/// S A^{-1} (sum_i D_ii R_i R_i^T) A^{-1} S^T with S_j = sum_i b(t_{i-1}) delta
/// on block j, A = R^T R and D_ii = delta^{-1} (LOO residual)^2 on kept rows.
/// Throws LeverageOne naming the first kept row with h_ii >= 1 - 1e-10.
Eigen::MatrixXd sandwich_covariance(const DesignSystem& system, const FitResult& fit);

/// Same sandwich with a caller-supplied diagonal D (length n).
Eigen::MatrixXd sandwich_covariance(const DesignSystem& system, const Eigen::VectorXd& d);

/// 95% normal confidence half-widths for the integrated betas.
Eigen::VectorXd integrated_beta_halfwidth(const FitResult& fit, double z = 1.959963984540054);

/// Local OLS over non-overlapping windows of k_n truncated increments.
struct AkxResult {
  int window = 0;
  std::vector<int> block_starts;
  Eigen::MatrixXd block_betas;     // blocks x p
  Eigen::VectorXd integrated_beta;  // p
};

/// Throws SingularError naming the first window whose local Gram is singular.
AkxResult fit_local_ols_akx(const TruncatedIncrements& inc, int window);
AkxResult fit_local_ols_akx(const PricePanel& panel, const TruncationSpec& spec, int window);

}  // namespace splinebeta
