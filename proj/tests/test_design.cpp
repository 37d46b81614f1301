#include <numeric>

#include "doctest.h"

#include "splinebeta/design.hpp"
#include "splinebeta/error.hpp"
#include "splinebeta/kernels.hpp"
#include "splinebeta/spline_ols.hpp"
#include "support/oracles.hpp"

using namespace splinebeta;

namespace {

TruncatedIncrements untruncated(const Eigen::VectorXd& dy, const Eigen::MatrixXd& dx, double delta) {
  Increments inc;
  inc.response = dy;
  inc.covariates = dx;
  inc.delta = delta;
  return truncate(inc, TruncationSpec::none(static_cast<int>(dx.cols())));
}

}  // namespace

TEST_CASE("single constant block reduces to a scalar regression") {
  Eigen::VectorXd dy(5);
  dy << 0.3, -0.1, 0.2, 0.05, -0.4;
  Eigen::MatrixXd dx(5, 1);
  dx << 0.1, -0.2, 0.3, 0.0, -0.1;
  const DesignSystem sys = build_design(untruncated(dy, dx, 0.2), SplineBasis::uniform(0, 1, 1.0));
  CHECK(sys.width() == 1);
  const Eigen::MatrixXd r = dense_design(sys);
  CHECK((r.col(0) - dx.col(0)).cwiseAbs().maxCoeff() == 0.0);
  const FitResult fit = fit_ols(sys);
  const double expected = dx.col(0).dot(dy) / dx.col(0).squaredNorm();
  CHECK(fit.gamma_hat[0] == doctest::Approx(expected).epsilon(1e-14));
  CHECK(block_gram(sys, 0)(0, 0) == doctest::Approx(dx.col(0).squaredNorm()).epsilon(1e-14));
}

TEST_CASE("zero design is singular or empty") {
  const Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(20, 2);
  const Eigen::VectorXd dy = Eigen::VectorXd::Ones(20);
  const DesignSystem sys = build_design(untruncated(dy, dx, 0.05), SplineBasis::uniform(3, 4, 1.0));
  CHECK_THROWS_AS(fit_ols(sys), SingularError);
}

TEST_CASE("every row dropped is an empty kept set") {
  Eigen::MatrixXd dx = Eigen::MatrixXd::Constant(10, 1, 1.0);
  Eigen::VectorXd dy = Eigen::VectorXd::Constant(10, 1.0);
  Increments inc{dy, dx, 0.1};
  TruncationSpec tight = TruncationSpec::none(1);
  tight.response_threshold = 0.5;
  try {
    build_design(truncate(inc, tight), SplineBasis::uniform(1, 3, 1.0));
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyKeptSet);
  }
}

TEST_CASE("horizon mismatch is rejected") {
  const TruncatedIncrements inc = untruncated(Eigen::VectorXd::Ones(10), Eigen::MatrixXd::Ones(10, 1), 0.1);
  CHECK_THROWS_AS(build_design(inc, SplineBasis::uniform(1, 3, 2.0)), Error);
}

TEST_CASE("norm truncation zeroes whole rows of the design") {
  const PricePanel panel = oracles::random_panel(400, 3, 71, {1.0, 0.5}, 0.3);
  const Increments inc = increments(panel);
  const TruncationSpec spec = make_truncation(inc, {0.47, 1.0, TruncationMode::Norm});
  const DesignSystem sys = build_design(truncate(inc, spec), SplineBasis::uniform(3, 6, panel.horizon()));
  const Eigen::MatrixXd r = dense_design(sys);
  int zeroed = 0;
  for (int i = 0; i < sys.row_count(); ++i) {
    if (sys.mask.response[i]) continue;
    ++zeroed;
    CHECK(r.row(i).cwiseAbs().maxCoeff() == 0.0);
    CHECK(sys.response[i] == 0.0);
  }
  CHECK(zeroed > 0);
}

TEST_CASE("stored block Grams match recomputation and are PSD") {
  const DesignSystem sys = oracles::random_system(500, 4, 3, 8, 5, {1.0, -0.5});
  const Eigen::MatrixXd r = dense_design(sys);
  for (int j = 0; j < sys.block_count(); ++j) {
    const Eigen::MatrixXd& w = block_gram(sys, j);
    CHECK((w - recompute_block_gram(sys, j)).cwiseAbs().maxCoeff() <= 1e-12 * w.cwiseAbs().maxCoeff());
    const Eigen::MatrixXd rj = r.middleCols(j * 8, 8);
    CHECK((w - rj.transpose() * rj).cwiseAbs().maxCoeff() <= 1e-12 * w.cwiseAbs().maxCoeff());
    CHECK((w - w.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(w);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-12 * eig.eigenvalues().maxCoeff());
  }
  CHECK_THROWS_AS(block_gram(sys, 4), Error);
  CHECK_THROWS_AS(block_gram(sys, -1), Error);
}

TEST_CASE("rows are sparse and integrated basis sums rows") {
  const DesignSystem sys = oracles::random_system(300, 5, 2, 9, 6);
  for (int i = 0; i < sys.row_count(); ++i) {
    const Eigen::VectorXd row = design_row(sys, i);
    CHECK((row.array() != 0.0).count() <= 5 * 3);
  }
  Eigen::VectorXd s = Eigen::VectorXd::Zero(9);
  for (int i = 0; i < sys.row_count(); ++i) s += sys.basis.evaluate(std::min(i * sys.delta, 1.0)) * sys.delta;
  CHECK((integrated_basis(sys) - s).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(integrated_basis(sys).sum() == doctest::Approx(sys.horizon()).epsilon(1e-12));
}

TEST_CASE("permuting covariates permutes coefficient blocks") {
  const PricePanel panel = oracles::random_panel(600, 3, 8, {1.0, -0.4, 0.2}, 0.02);
  const Increments inc = increments(panel);
  const std::vector<int> perm{2, 0, 1};
  Increments swapped = inc;
  for (int j = 0; j < 3; ++j) swapped.covariates.col(j) = inc.covariates.col(perm[j]);
  const SplineBasis basis = SplineBasis::uniform(3, 5, panel.horizon());
  const auto none = TruncationSpec::none(3);
  const FitResult a = fit_ols(build_design(truncate(inc, none), basis));
  const FitResult b = fit_ols(build_design(truncate(swapped, none), basis));
  for (int j = 0; j < 3; ++j)
    CHECK((b.gamma_hat.segment(j * 5, 5) - a.gamma_hat.segment(perm[j] * 5, 5)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("zero_rows clears data and flags") {
  const TruncatedIncrements inc = untruncated(Eigen::VectorXd::Ones(6), Eigen::MatrixXd::Ones(6, 2), 0.5);
  BoolVector drop = BoolVector::Constant(6, false);
  drop[1] = drop[4] = true;
  const TruncatedIncrements z = zero_rows(inc, drop);
  CHECK(z.response[1] == 0.0);
  CHECK(z.covariates.row(4).cwiseAbs().sum() == 0.0);
  CHECK_FALSE(z.mask.row_kept(1));
  CHECK(z.mask.row_kept(0));
  CHECK(z.mask.kept_row_count() == 4);
  CHECK_THROWS_AS(zero_rows(inc, BoolVector::Constant(3, false)), Error);
}

TEST_CASE("dense products agree with the factored kernels") {
  const DesignSystem sys = oracles::random_system(257, 3, 3, 7, 12, {0.5});
  const Eigen::MatrixXd r = dense_design(sys);
  Eigen::VectorXd g = Eigen::VectorXd::LinSpaced(sys.width(), -1.0, 2.0);
  for (auto exec : {kernels::Exec::Serial, kernels::Exec::Parallel}) {
    CHECK((kernels::apply(sys, g, exec) - r * g).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK((kernels::apply_transpose(sys, sys.response, exec) - r.transpose() * sys.response).cwiseAbs().maxCoeff() <=
          1e-13);
    const Eigen::MatrixXd full = r.transpose() * r;
    CHECK((kernels::gram(sys, nullptr, {}, exec) - full).cwiseAbs().maxCoeff() <= 1e-12 * full.cwiseAbs().maxCoeff());
    const Eigen::MatrixXd sub = kernels::gram(sys, nullptr, {2, 0}, exec);
    CHECK((sub.topLeftCorner(7, 7) - full.block(14, 14, 7, 7)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((sub.topRightCorner(7, 7) - full.block(14, 0, 7, 7)).cwiseAbs().maxCoeff() <= 1e-12);
    const Eigen::MatrixXd rr = r * r.transpose();
    CHECK((kernels::row_gram(sys, exec) - rr).cwiseAbs().maxCoeff() <= 1e-12 * rr.cwiseAbs().maxCoeff());
  }
}
