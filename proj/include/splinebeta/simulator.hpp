#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "splinebeta/preprocess.hpp"

namespace splinebeta {

/// Parameters of one covariate: drift, CIR variance and jump sizes.
struct FactorParams {
  double drift = 0.05;
  double sigma0_sq = 0.10;
  double kappa_v = 5.0;
  double alpha_v = 0.06;
  double vol_of_vol = 0.35;
  double omega = 0.5;       // probability of an upward jump
  double g_plus = 0.0;      // mean upward jump
  double g_minus = 0.0;     // mean downward jump magnitude
  double g_vol = 0.0045;    // mean variance jump
};

enum class CorrelationKind { Toeplitz, BlockLatent };

struct CorrelationSpec {
  CorrelationKind kind = CorrelationKind::Toeplitz;
  double r = 0.15;
  int latent_dim = 5;
  std::uint64_t seed = 0;
};

struct BetaParams {
  double kappa = 2.0;
  double alpha = 0.0;
  double vol = 0.1;
  double beta0 = 0.0;
};

struct IdiosyncraticParams {
  double drift = 0.0;
  double sigma = 0.35;
  double omega = 0.5;
  double g_plus = 0.0;
  double g_minus = 0.0;
  double intensity = 67.0;
};

struct SimulationSpec {
  int p = 3;
  int q = 3;
  double delta = 1.0 / (252.0 * 78.0);  // years
  int intervals = 21 * 78;
  double jump_intensity = 67.0;  // common Poisson rate, per year
  std::vector<FactorParams> factors;  // p entries
  std::vector<BetaParams> betas;      // q entries
  IdiosyncraticParams idio;
  CorrelationSpec correlation;
  std::uint64_t seed = 0;

  double horizon() const noexcept { return delta * intervals; }

  /// The Monte Carlo design with p covariates and 3 relevant ones. Parameters of
  /// covariates 4..p are drawn once from their uniform ranges using `param_seed`.
  static SimulationSpec default_design(int p, std::uint64_t seed, std::uint64_t param_seed = 2024);

  /// Throws InvalidArgument on inconsistent sizes or nonpositive steps.
  void validate() const;
};

/// r^{|j-k|}.
Eigen::MatrixXd toeplitz_correlation(int p, double r);

/// Relevant block Toeplitz(0.15), redundant block from k latent factors and a
/// uniform cross block scaled by the largest kappa in (0, 1] keeping the Schur
/// complement positive definite. `forced_kappa` >= 0 skips the search.
Eigen::MatrixXd block_latent_correlation(int p, int q, int latent_dim, std::uint64_t seed,
                                         double forced_kappa = -1.0, double* kappa_out = nullptr);

Eigen::MatrixXd correlation_matrix(const SimulationSpec& spec);

struct SimulationTruth {
  Eigen::MatrixXd beta_grid;       // (n+1) x p, beta at t_0..t_n (zero for irrelevant covariates)
  Eigen::VectorXd integrated_beta;  // p, sum_i beta_{t_{i-1}} * delta
  std::vector<double> jump_times;          // common factor jumps
  std::vector<double> idio_jump_times;     // response-specific jumps
  std::vector<int> active_set;             // 0..q-1
  Eigen::VectorXd qv_shares;  // q, [int beta_j dX_j, Y]_T / [Y]_T, jumps included
  bool feller_ok = true;      // 2 kappa' alpha' >= v'^2 for every covariate
};

struct SimulationOutput {
  PricePanel panel;
  SimulationTruth truth;
};

/// Child generator for replication r of a run seeded with `seed`.
std::mt19937_64 child_rng(std::uint64_t seed, std::uint64_t replication);

/// One Euler path with all initial log prices at zero.
SimulationOutput simulate_panel(const SimulationSpec& spec, std::uint64_t replication = 0);

}  // namespace splinebeta
