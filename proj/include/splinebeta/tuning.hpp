#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "splinebeta/preprocess.hpp"
#include "splinebeta/tlp_select.hpp"

namespace splinebeta {

/// tau = alpha_tau * sqrt(medrv(dY)) over the whole window.
double make_tau(const PricePanel& panel, double alpha_tau);

/// Same scale estimated from `rows` (all rows if empty) and stretched to the
/// full window, so that training subsets give comparable values.
double make_tau(const Increments& inc, double alpha_tau, std::span<const int> rows = {});

/// Penalty for a standardized level: tau as above and lambda/tau = level * sqrt(medrv(dY)),
/// which makes the level dimensionless.
PenaltyConfig make_penalty(const Increments& inc, double alpha_tau, double level, std::span<const int> rows = {});

/// Standardized level above which every block is zero at gamma = 0.
double standardized_max_level(const DesignSystem& system, const Increments& inc);

/// Interleaved folds: interval i goes to fold (i + seed) mod K.
std::vector<int> assign_folds(int n, int folds, std::uint64_t seed);

struct CvCell {
  int basis_count = 4;
  double level = 0.0;  // standardized; ignored when unpenalized
};

struct CvOptions {
  TruncationConfig truncation;
  double alpha_tau = 0.01;
  int degree = 3;
  int folds = 5;
  std::uint64_t seed = 0;
  bool penalized = true;
  /// When set, every fold uses these thresholds instead of re-estimating them.
  std::optional<TruncationSpec> fixed_truncation;
};

struct CvReport {
  std::vector<CvCell> grid;
  int fold_count = 0;
  std::uint64_t seed = 0;
  bool penalized = true;
  double alpha_tau = 0.0;
  std::vector<double> per_cell_mse;
  std::vector<double> per_cell_se;
  std::vector<bool> valid;
  int chosen_min = -1;
  int chosen_one_se = -1;
  std::vector<int> fold_assignment;
};

/// Default grid: K in {4, 6, 8, 12, 16} crossed with 12 log-spaced levels over
/// [1e-3, 1] times `max_level`.
std::vector<CvCell> default_grid(double max_level);

/// K-fold CV. Each fold recomputes thresholds and tau from its training rows,
/// fits with the held-out rows zeroed and scores squared prediction error on
/// the held-out rows that survive the training thresholds. Cells where any fold
/// fails (singular OLS, solver non-convergence) are invalid; an entirely invalid
/// grid throws Singular.
CvReport cross_validate(const Increments& inc, const std::vector<CvCell>& grid, const CvOptions& options);
CvReport cross_validate(const PricePanel& panel, const TruncationSpec& spec, double alpha_tau,
                        const std::vector<CvCell>& grid, int folds, std::uint64_t seed, bool penalized);

/// Apply the selection rules to per-cell statistics (fills chosen_min, chosen_one_se).
void choose_cells(CvReport& report);

}  // namespace splinebeta
