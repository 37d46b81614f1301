#include "splinebeta/design.hpp"

#include <cmath>
#include <string>

#include "splinebeta/error.hpp"
#include "splinebeta/kernels.hpp"

namespace splinebeta {

TruncatedIncrements zero_rows(const TruncatedIncrements& inc, const BoolVector& drop) {
  require(drop.size() == inc.response.size(), "row mask length does not match increments");
  TruncatedIncrements out = inc;
  for (Eigen::Index i = 0; i < drop.size(); ++i) {
    if (!drop[i]) continue;
    out.response[i] = 0.0;
    out.covariates.row(i).setZero();
    out.mask.response[i] = false;
    out.mask.covariates.row(i).setConstant(false);
  }
  return out;
}

DesignSystem build_design(const TruncatedIncrements& inc, const SplineBasis& basis) {
  const int n = inc.interval_count();
  require(n >= 1, "design needs at least one interval");
  const double horizon = inc.horizon();
  require(std::abs(basis.horizon() - horizon) <= 1e-9 * horizon,
          "basis horizon " + std::to_string(basis.horizon()) + " does not match panel horizon " +
              std::to_string(horizon));
  if (inc.mask.kept_row_count() == 0) fail(ErrorKind::EmptyKeptSet, "no interval survives truncation");

  DesignSystem sys{basis, inc.delta, inc.response, inc.covariates, {}, {}, inc.mask, {}};
  const int width = basis.degree() + 1;
  sys.local.resize(n, width);
  sys.first.resize(n);
  for (int i = 0; i < n; ++i) {
    const double t = std::min(inc.delta * i, basis.horizon());
    const LocalBasis b = basis.evaluate_local(t);
    sys.first[i] = b.first;
    sys.local.row(i) = b.values.transpose();
  }
  sys.block_grams = kernels::block_grams(sys);
  return sys;
}

DesignSystem build_design(const PricePanel& panel, const SplineBasis& basis, const TruncationSpec& spec) {
  return build_design(truncate(increments(panel), spec), basis);
}

const Eigen::MatrixXd& block_gram(const DesignSystem& system, int j) {
  if (j < 0 || j >= system.block_count())
    fail(ErrorKind::OutOfRange, "block index " + std::to_string(j) + " outside [0, " +
                                    std::to_string(system.block_count()) + ")");
  return system.block_grams[j];
}

Eigen::MatrixXd recompute_block_gram(const DesignSystem& system, int j) {
  if (j < 0 || j >= system.block_count()) fail(ErrorKind::OutOfRange, "block index out of range");
  const int K = system.basis_count();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(K, K);
  for (int i = 0; i < system.row_count(); ++i) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(K);
    r.segment(system.first[i], system.local.cols()) = system.covariates(i, j) * system.local.row(i).transpose();
    w.noalias() += r * r.transpose();
  }
  return w;
}

Eigen::VectorXd design_row(const DesignSystem& system, int i) {
  const int K = system.basis_count();
  const int w = static_cast<int>(system.local.cols());
  Eigen::VectorXd row = Eigen::VectorXd::Zero(system.width());
  for (int j = 0; j < system.block_count(); ++j)
    row.segment(j * K + system.first[i], w) = system.covariates(i, j) * system.local.row(i).transpose();
  return row;
}

Eigen::MatrixXd dense_design(const DesignSystem& system) {
  Eigen::MatrixXd r(system.row_count(), system.width());
  for (int i = 0; i < system.row_count(); ++i) r.row(i) = design_row(system, i).transpose();
  return r;
}

Eigen::VectorXd integrated_basis(const DesignSystem& system) {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(system.basis_count());
  for (int i = 0; i < system.row_count(); ++i)
    s.segment(system.first[i], system.local.cols()) += system.local.row(i).transpose();
  return s * system.delta;
}

}  // namespace splinebeta
