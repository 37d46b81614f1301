#include "splinebeta/spline_ols.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "splinebeta/error.hpp"
#include "splinebeta/kernels.hpp"

namespace splinebeta {

namespace {

Eigen::LLT<Eigen::MatrixXd> factor_gram(const Eigen::MatrixXd& a, const std::string& what) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  const double rc = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
  if (!(rc >= kSingularRcond))
    throw SingularError(what + ": Gram matrix is singular (rcond " + std::to_string(rc) + ")", rc);
  return llt;
}

// p x pK block-diagonal matrix carrying the integrated basis on each block.
Eigen::MatrixXd integration_operator(const DesignSystem& sys) {
  const int p = sys.block_count(), K = sys.basis_count();
  const Eigen::VectorXd s = integrated_basis(sys);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p, p * K);
  for (int j = 0; j < p; ++j) out.block(j, j * K, 1, K) = s.transpose();
  return out;
}

}  // namespace

FitResult make_fit(const DesignSystem& system, Eigen::VectorXd gamma) {
  require(gamma.size() == system.width(), "coefficient length does not match design width");
  const int p = system.block_count(), K = system.basis_count();
  FitResult fit{std::move(gamma), system.basis, p, system.row_count(), system.delta, {}, {}, {}, 0.0};
  fit.residuals = system.response - kernels::apply(system, fit.gamma_hat);
  const Eigen::VectorXd s = integrated_basis(system);
  fit.integrated_beta.resize(p);
  for (int j = 0; j < p; ++j) fit.integrated_beta[j] = s.dot(fit.gamma_hat.segment(j * K, K));
  return fit;
}

FitResult fit_ols(const DesignSystem& system) {
  const Eigen::MatrixXd a = kernels::gram(system);
  const Eigen::VectorXd b = kernels::apply_transpose(system, system.response);
  const auto llt = factor_gram(a, "spline OLS");
  FitResult fit = make_fit(system, llt.solve(b));
  fit.condition_diagnostic = llt.rcond();
  return fit;
}

FitResult fit_min_norm(const DesignSystem& system) {
  const Eigen::MatrixXd g = kernels::row_gram(system);
  const int n = system.row_count();
  // rows with an all-zero design row carry no information
  std::vector<int> live;
  for (int i = 0; i < n; ++i)
    if (g(i, i) > 0.0) live.push_back(i);
  if (live.empty()) fail(ErrorKind::EmptyKeptSet, "minimum-norm fit: design is identically zero");

  const int m = static_cast<int>(live.size());
  Eigen::MatrixXd gl(m, m);
  Eigen::VectorXd yl(m);
  for (int a = 0; a < m; ++a) {
    yl[a] = system.response[live[a]];
    for (int b = 0; b < m; ++b) gl(a, b) = g(live[a], live[b]);
  }
  Eigen::VectorXd alpha_l;
  double rc = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt(gl);
  if (llt.info() == Eigen::Success) rc = llt.rcond();
  if (rc >= 1e-13) {
    alpha_l = llt.solve(yl);
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gl);
    const Eigen::VectorXd& ev = eig.eigenvalues();
    const double cut = 1e-12 * ev.cwiseAbs().maxCoeff();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(m);
    for (int k = 0; k < m; ++k)
      if (ev[k] > cut) inv[k] = 1.0 / ev[k];
    alpha_l = eig.eigenvectors() * inv.asDiagonal() * (eig.eigenvectors().transpose() * yl);
    rc = ev.minCoeff() / ev.maxCoeff();
  }
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  for (int a = 0; a < m; ++a) alpha[live[a]] = alpha_l[a];
  FitResult fit = make_fit(system, kernels::apply_transpose(system, alpha));
  fit.condition_diagnostic = rc;
  return fit;
}

Eigen::VectorXd beta_path(const FitResult& fit, double t) {
  const LocalBasis b = fit.basis.evaluate_local(t);
  const int K = fit.basis.basis_count();
  Eigen::VectorXd out(fit.block_count);
  for (int j = 0; j < fit.block_count; ++j)
    out[j] = b.values.dot(fit.gamma_hat.segment(j * K + b.first, b.values.size()));
  return out;
}

Eigen::VectorXd integrated_beta(const FitResult& fit, int n, double delta) {
  require(n >= 1 && delta > 0.0, "integration grid must be nonempty with positive step");
  require(n * delta <= fit.basis.horizon() * (1.0 + 1e-9), "integration grid exceeds the fit horizon");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(fit.block_count);
  for (int i = 0; i < n; ++i) acc += beta_path(fit, std::min(i * delta, fit.basis.horizon()));
  return acc * delta;
}

LooResiduals loo_residuals(const DesignSystem& system, const FitResult& fit) {
  const auto llt = factor_gram(kernels::gram(system), "leverage");
  const Eigen::MatrixXd m = llt.matrixL().solve(dense_design(system).transpose());
  LooResiduals out;
  out.leverage = m.colwise().squaredNorm().transpose();
  out.residual.resize(system.row_count());
  for (int i = 0; i < system.row_count(); ++i) {
    const double h = out.leverage[i];
    out.residual[i] = h < 1.0 ? fit.residuals[i] / (1.0 - h) : std::numeric_limits<double>::infinity();
  }
  return out;
}

Eigen::MatrixXd sandwich_covariance(const DesignSystem& system, const Eigen::VectorXd& d) {
  require(d.size() == system.row_count(), "weight length does not match design rows");
  const auto llt = factor_gram(kernels::gram(system), "sandwich covariance");
  const Eigen::MatrixXd qt = llt.solve(integration_operator(system).transpose());  // pK x p
  const int p = system.block_count();
  Eigen::MatrixXd v(system.row_count(), p);
  for (int c = 0; c < p; ++c) v.col(c) = kernels::apply(system, qt.col(c));
  Eigen::MatrixXd cov = v.transpose() * d.asDiagonal() * v;
  return 0.5 * (cov + cov.transpose());
}

Eigen::MatrixXd sandwich_covariance(const DesignSystem& system, const FitResult& fit) {
  const LooResiduals loo = loo_residuals(system, fit);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(system.row_count());
  for (int i = 0; i < system.row_count(); ++i) {
    if (!system.mask.row_kept(i)) continue;
    if (loo.leverage[i] >= 1.0 - 1e-10)
      fail(ErrorKind::LeverageOne, "row " + std::to_string(i) + " has leverage " +
                                       std::to_string(loo.leverage[i]) + "; its leave-one-out fit is undefined");
    d[i] = loo.residual[i] * loo.residual[i] / system.delta;
  }
  return sandwich_covariance(system, d);
}

Eigen::VectorXd integrated_beta_halfwidth(const FitResult& fit, double z) {
  require(fit.covariance.has_value(), "fit carries no covariance");
  return z * (fit.delta * fit.covariance->diagonal().array().max(0.0)).sqrt().matrix();
}

AkxResult fit_local_ols_akx(const TruncatedIncrements& inc, int window) {
  const int n = inc.interval_count(), p = inc.covariate_count();
  require(window >= 1, "AKX window must be positive");
  require(window <= n, "AKX window longer than the sample");
  AkxResult out;
  out.window = window;
  for (int s = 0; s < n; s += window) out.block_starts.push_back(s);
  const int blocks = static_cast<int>(out.block_starts.size());
  out.block_betas.resize(blocks, p);
  out.integrated_beta = Eigen::VectorXd::Zero(p);
  for (int b = 0; b < blocks; ++b) {
    const int s = out.block_starts[b];
    const int len = std::min(window, n - s);
    const auto x = inc.covariates.middleRows(s, len);
    const auto y = inc.response.segment(s, len);
    if (len < p)
      throw SingularError("AKX window " + std::to_string(b) + " has " + std::to_string(len) +
                              " rows for " + std::to_string(p) + " covariates",
                          0.0);
    const Eigen::MatrixXd a = x.transpose() * x;
    const auto llt = factor_gram(a, "AKX window " + std::to_string(b));
    const Eigen::VectorXd beta = llt.solve(x.transpose() * y);
    out.block_betas.row(b) = beta.transpose();
    out.integrated_beta += beta * (len * inc.delta);
  }
  return out;
}

AkxResult fit_local_ols_akx(const PricePanel& panel, const TruncationSpec& spec, int window) {
  return fit_local_ols_akx(truncate(increments(panel), spec), window);
}

}  // namespace splinebeta
