#include <cmath>
#include <random>

#include "doctest.h"

#include "splinebeta/error.hpp"
#include "splinebeta/spline_ols.hpp"
#include "splinebeta/tlp_select.hpp"
#include "support/oracles.hpp"

using namespace splinebeta;

namespace {

bool non_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1] * (1.0 + 1e-10) + 1e-14) return false;
  return true;
}

}  // namespace

TEST_CASE("truncated L1 values") {
  CHECK(tlp(0.0, 2.0) == 0.0);
  CHECK(tlp(1.0, 2.0) == 0.5);
  CHECK(tlp(-1.0, 2.0) == 0.5);
  CHECK(tlp(2.0, 2.0) == 1.0);
  CHECK(tlp(-7.0, 2.0) == 1.0);
}

TEST_CASE("penalty config from a level") {
  const PenaltyConfig c = PenaltyConfig::from_level(0.4, 0.25);
  CHECK(c.lambda == doctest::Approx(0.1));
  CHECK(c.effective_level() == doctest::Approx(0.25));
  CHECK_THROWS_AS(PenaltyConfig::from_level(0.0, 1.0), Error);
  CHECK_THROWS_AS(PenaltyConfig::from_level(1.0, -1.0), Error);
}

TEST_CASE("objective values") {
  const DesignSystem sys = oracles::random_system(100, 2, 1, 3, 3, {0.5}, 0.1);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(6);
  const PenaltyConfig cfg = PenaltyConfig::from_level(0.5, 2.0);
  CHECK(penalized_objective(sys, zero, cfg) == doctest::Approx(0.5 * sys.response.squaredNorm()));
  Eigen::VectorXd g = zero;
  g.head(3).setConstant(10.0);  // block norm far above tau
  const double rss = 0.5 * (sys.response - dense_design(sys) * g).squaredNorm();
  CHECK(penalized_objective(sys, g, cfg) == doctest::Approx(rss + cfg.lambda).epsilon(1e-12));
  const Eigen::VectorXd norms = weighted_block_norms(sys, g);
  CHECK(norms[0] == doctest::Approx(std::sqrt(g.head(3).dot(block_gram(sys, 0) * g.head(3)))));
  CHECK(norms[1] == 0.0);
  Eigen::VectorXd w(2);
  w << 0.3, 0.7;
  CHECK(group_lasso_objective(sys, g, w) == doctest::Approx(rss + 0.3 * norms[0]).epsilon(1e-12));
}

TEST_CASE("prox closed forms") {
  SUBCASE("identity metric is block soft thresholding") {
    Eigen::VectorXd v(3);
    v << 3.0, 0.0, 4.0;
    const Eigen::VectorXd x = weighted_group_prox(v, Eigen::MatrixXd::Identity(3, 3), 2.0);
    CHECK((x - 0.6 * v).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(weighted_group_prox(v, Eigen::MatrixXd::Identity(3, 3), 5.0).norm() == 0.0);
    CHECK(weighted_group_prox(v, Eigen::MatrixXd::Identity(3, 3), 6.0).norm() == 0.0);
  }
  SUBCASE("scalar block") {
    const Eigen::MatrixXd w = Eigen::MatrixXd::Constant(1, 1, 4.0);
    CHECK(weighted_group_prox(Eigen::VectorXd::Constant(1, -3.0), w, 2.0)[0] == doctest::Approx(-2.0));
    CHECK(weighted_group_prox(Eigen::VectorXd::Constant(1, 0.9), w, 2.0)[0] == 0.0);
  }
  SUBCASE("zero metric") {
    CHECK(weighted_group_prox(Eigen::VectorXd::Ones(2), Eigen::MatrixXd::Zero(2, 2), 1.0).norm() == 0.0);
  }
  SUBCASE("zero threshold is the identity") {
    Eigen::MatrixXd w(2, 2);
    w << 2.0, 0.5, 0.5, 1.0;
    Eigen::VectorXd v(2);
    v << 0.3, -1.1;
    CHECK((weighted_group_prox(v, w, 0.0) - v).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("prox matches the numeric minimum") {
  const oracles::SuiteResult r = oracles::prox_suite(200, 77);
  INFO(r.detail);
  CHECK(r.cases == 200);
  CHECK(r.worst <= 1e-8);
}

TEST_CASE("group LASSO limits") {
  const DesignSystem sys = oracles::random_system(300, 3, 3, 5, 8, {1.0, -0.5}, 0.05);
  const PenaltyConfig cfg;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(sys.width());
  SUBCASE("zero weights give OLS") {
    const Eigen::VectorXd g = group_lasso_solve(sys, Eigen::VectorXd::Zero(3), zero, cfg);
    const FitResult ols = fit_ols(sys);
    CHECK((g - ols.gamma_hat).cwiseAbs().maxCoeff() <= 1e-6 * (1.0 + ols.gamma_hat.cwiseAbs().maxCoeff()));
  }
  SUBCASE("weights above the largest gradient give zero") {
    const double m = max_block_gradient(sys);
    const Eigen::VectorXd g = group_lasso_solve(sys, Eigen::VectorXd::Constant(3, 1.0001 * m), zero, cfg);
    CHECK(g.norm() == 0.0);
    const Eigen::VectorXd h = group_lasso_solve(sys, Eigen::VectorXd::Constant(3, 0.9 * m), zero, cfg);
    CHECK(h.norm() > 0.0);
  }
  SUBCASE("objective trace is non-increasing") {
    GroupLassoStats st;
    const double m = max_block_gradient(sys);
    Eigen::VectorXd w(3);
    w << 0.2 * m, 0.5 * m, 0.0;
    group_lasso_solve(sys, w, zero, cfg, &st);
    CHECK(st.iterations > 0);
    CHECK(non_increasing(st.objective_trace));
  }
  SUBCASE("weight length is checked") {
    CHECK_THROWS_AS(group_lasso_solve(sys, Eigen::VectorXd::Zero(2), zero, cfg), Error);
  }
}

TEST_CASE("group LASSO matches a long-run reference solver") {
  const oracles::SuiteResult r = oracles::solver_suite(10, 5);
  INFO(r.detail);
  CHECK(r.cases == 10);
  CHECK(r.worst <= 1e-6);
}

TEST_CASE("DC selection extremes") {
  const DesignSystem sys = oracles::random_system(400, 4, 3, 5, 9, {1.0, -0.8}, 0.02);
  SUBCASE("zero penalty is OLS") {
    const SelectionResult sel = dc_solve(sys, PenaltyConfig::from_level(0.01, 0.0));
    const FitResult ols = fit_ols(sys);
    CHECK((sel.gamma_star - ols.gamma_hat).cwiseAbs().maxCoeff() <= 1e-6 * (1.0 + ols.gamma_hat.norm()));
    CHECK(sel.active_set.size() == 4);
  }
  SUBCASE("huge penalty selects nothing") {
    const double tau = 0.01;
    const SelectionResult sel = dc_solve(sys, PenaltyConfig::from_level(tau, 2.0 * max_block_gradient(sys)));
    CHECK(sel.active_set.empty());
    CHECK(sel.gamma_star.norm() == 0.0);
    CHECK(sel.converged);
  }
  SUBCASE("moderate penalty finds the relevant blocks") {
    const double m = max_block_gradient(sys);
    const SelectionResult sel = dc_solve(sys, PenaltyConfig::from_level(0.01, 0.05 * m));
    CHECK(sel.active_set == std::vector<int>{0, 1});
    CHECK(sel.converged);
    CHECK(non_increasing(sel.objective_trace));
    const KktReport k = kkt_check(sys, sel.gamma_star, sel.config);
    CHECK(k.active_ok);
    CHECK(k.inactive_ok);
    Eigen::VectorXd bad = sel.gamma_star;
    bad[1] += 0.5;
    CHECK_FALSE(kkt_check(sys, bad, sel.config).active_ok);
    Eigen::VectorXd dropped = sel.gamma_star;
    dropped.head(5).setZero();
    CHECK_FALSE(kkt_check(sys, dropped, sel.config).inactive_ok);
  }
}

TEST_CASE("a reused workspace reproduces fresh solves bitwise") {
  const DesignSystem sys = oracles::random_system(500, 5, 3, 6, 10, {1.0, 0.5, -0.3}, 0.05);
  const SolverWorkspace ws(sys);
  CHECK(&ws.system() == &sys);
  const double m = max_block_gradient(sys);
  for (double f : {0.5, 0.1, 0.02, 0.001}) {
    const PenaltyConfig cfg = PenaltyConfig::from_level(0.02, f * m);
    const SelectionResult a = dc_solve(ws, cfg);
    const SelectionResult b = dc_solve(sys, cfg);
    CHECK(a.active_set == b.active_set);
    CHECK((a.gamma_star.array() == b.gamma_star.array()).all());
    CHECK(a.objective_trace == b.objective_trace);
  }
}

TEST_CASE("max block gradient is the dual norm at zero") {
  const DesignSystem sys = oracles::random_system(200, 3, 2, 4, 11, {0.3});
  const Eigen::MatrixXd r = dense_design(sys);
  const Eigen::VectorXd c = r.transpose() * sys.response;
  double best = 0.0;
  for (int j = 0; j < 3; ++j) {
    Eigen::LLT<Eigen::MatrixXd> llt(block_gram(sys, j));
    best = std::max(best, llt.matrixL().solve(c.segment(j * 4, 4)).norm());
  }
  CHECK(max_block_gradient(sys) == doctest::Approx(best).epsilon(1e-10));
}
