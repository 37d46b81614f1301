#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "splinebeta/design.hpp"
#include "splinebeta/preprocess.hpp"

// Independent reference computations shared by the unit tests and the
// acceptance runner. None of them calls the solver code they are used to check.
namespace oracles {

/// Random-walk log-price panel with p covariates and response loading `beta`
/// on the first beta.size() covariates, Gaussian noise of scale `noise`.
splinebeta::PricePanel random_panel(int n, int p, std::uint64_t seed, const std::vector<double>& beta = {},
                                    double noise = 0.01, double horizon = 1.0);

/// Untruncated design on a random panel.
splinebeta::DesignSystem random_system(int n, int p, int degree, int basis_count, std::uint64_t seed,
                                       const std::vector<double>& beta = {}, double noise = 0.01);

/// min over x of 1/2 (x - v)^T W (x - v) + t sqrt(x^T W x), by exact radial
/// minimization and numerical descent over directions on the unit sphere.
double prox_objective(const Eigen::VectorXd& x, const Eigen::VectorXd& v, const Eigen::MatrixXd& w, double t);
double numeric_prox_minimum(const Eigen::VectorXd& v, const Eigen::MatrixXd& w, double t);

struct SuiteResult {
  double worst = 0.0;  // largest error seen
  int cases = 0;
  std::string detail;
};

/// (a) weighted_group_prox against the numeric minimum on random (v, W, t), K <= 4.
SuiteResult prox_suite(int draws, std::uint64_t seed);

/// (b) leverage LOO residuals against explicit delete-one refits.
SuiteResult loo_suite(int n, std::uint64_t seed);

/// Group LASSO by plain proximal gradient on a dense whitened design, run for a
/// fixed large number of iterations. Returns the objective reached.
double long_run_group_lasso(const splinebeta::DesignSystem& system, const Eigen::VectorXd& weights,
                            int iterations, Eigen::VectorXd* gamma_out = nullptr);

/// (c) group_lasso_solve objective against the long-run solver on tiny instances.
SuiteResult solver_suite(int instances, std::uint64_t seed);

/// (d) partition of unity, nonnegativity, local support and finite-difference
/// derivatives for several (degree, K) pairs.
SuiteResult spline_suite();

/// (f) export then ingest a simulated panel; worst absolute difference.
SuiteResult csv_suite(std::uint64_t seed);

}  // namespace oracles
