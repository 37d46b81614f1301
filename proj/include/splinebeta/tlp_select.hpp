#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "splinebeta/design.hpp"

namespace splinebeta {

struct PenaltyConfig {
  double tau = 1.0;
  double lambda = 0.0;
  int max_dc_iters = 20;
  int max_inner_iters = 20000;
  double inner_tol = 1e-8;       // relative objective decrease
  double kkt_rel_tol = 1e-6;     // KKT residual relative to ||response||
  int dc_stabilization = 2;

  double effective_level() const noexcept { return lambda / tau; }

  /// Config with lambda = level * tau. Throws InvalidArgument for tau <= 0 or level < 0.
  static PenaltyConfig from_level(double tau, double level);
};

/// min(|x| / tau, 1).
double tlp(double x, double tau);

/// sqrt(gamma_j^T W_j gamma_j) for every block.
Eigen::VectorXd weighted_block_norms(const DesignSystem& system, const Eigen::VectorXd& gamma);

/// 1/2 ||Y - R gamma||^2 + lambda * sum_j tlp(||gamma_j||_W, tau).
double penalized_objective(const DesignSystem& system, const Eigen::VectorXd& gamma, const PenaltyConfig& config);

/// 1/2 ||Y - R gamma||^2 + sum_j weights_j ||gamma_j||_W.
double group_lasso_objective(const DesignSystem& system, const Eigen::VectorXd& gamma,
                             const Eigen::VectorXd& weights);

/// argmin_x 1/2 (x - v)^T W (x - v) + t sqrt(x^T W x), computed in the
/// Cholesky coordinates eta = L^T x of W = L L^T. Singular W is floored at
/// 1e-12 * trace / K; a zero W returns zero.
Eigen::VectorXd weighted_group_prox(const Eigen::VectorXd& v, const Eigen::MatrixXd& w, double t);

struct GroupLassoStats {
  int iterations = 0;
  double kkt_residual = 0.0;
  std::vector<double> objective_trace;  // one entry per accepted proximal step
};

/// Per-design solver state: block Cholesky factors, R^T Y in whitened
/// coordinates and, for designs up to kFullGramWidth columns, the whitened
/// Gram matrix. Reusing one workspace across penalty levels gives the same
/// results as building a fresh one each time.
class SolverWorkspace {
 public:
  static constexpr int kFullGramWidth = 2048;

  explicit SolverWorkspace(const DesignSystem& system);
  ~SolverWorkspace();
  SolverWorkspace(const SolverWorkspace&) = delete;
  SolverWorkspace& operator=(const SolverWorkspace&) = delete;

  const DesignSystem& system() const noexcept;

  struct Impl;
  const Impl& impl() const noexcept { return *impl_; }

 private:
  std::unique_ptr<Impl> impl_;
};

/// Weighted group LASSO by working-set proximal gradient with monotone
/// momentum. Throws NonConvergenceError after config.max_inner_iters iterations.
Eigen::VectorXd group_lasso_solve(const DesignSystem& system, const Eigen::VectorXd& weights,
                                  const Eigen::VectorXd& warm_start, const PenaltyConfig& config,
                                  GroupLassoStats* stats = nullptr);
Eigen::VectorXd group_lasso_solve(const SolverWorkspace& workspace, const Eigen::VectorXd& weights,
                                  const Eigen::VectorXd& warm_start, const PenaltyConfig& config,
                                  GroupLassoStats* stats = nullptr);

struct SelectionResult {
  Eigen::VectorXd gamma_star;
  std::vector<int> active_set;
  Eigen::VectorXd weighted_block_norms;
  std::vector<double> objective_trace;  // TLP objective after each DC step
  std::vector<int> inner_iterations;
  int dc_iterations = 0;
  bool converged = false;
  PenaltyConfig config;
};

/// DC iterations from gamma = 0.
SelectionResult dc_solve(const DesignSystem& system, const PenaltyConfig& config);
SelectionResult dc_solve(const SolverWorkspace& workspace, const PenaltyConfig& config);

struct KktReport {
  bool active_ok = true;
  bool inactive_ok = true;
  double worst_active_residual = 0.0;
  double worst_inactive_excess = 0.0;
  Eigen::VectorXd gradient_norm;        // ||c_j||
  Eigen::VectorXd dual_norm;            // ||L_j^{-1} c_j||
  Eigen::VectorXd w_weighted_norm;      // sqrt(c_j^T W_j c_j)
};

/// Stationarity diagnostics at gamma with c_j = -R_j^T (Y - R gamma):
/// unpenalized blocks (norm > tau) need ||c_j|| <= tol; penalized nonzero
/// blocks need the group-LASSO subgradient residual <= tol; zero blocks need
/// ||L_j^{-1} c_j|| <= lambda/tau + tol.
KktReport kkt_check(const DesignSystem& system, const Eigen::VectorXd& gamma, const PenaltyConfig& config,
                    double tol = 1e-5);

/// max_j ||L_j^{-1} R_j^T Y||: the smallest uniform weight giving gamma = 0.
double max_block_gradient(const DesignSystem& system);

}  // namespace splinebeta
