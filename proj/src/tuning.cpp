#include "splinebeta/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "splinebeta/design.hpp"
#include "splinebeta/error.hpp"
#include "splinebeta/kernels.hpp"
#include "splinebeta/spline_ols.hpp"

namespace splinebeta {

namespace {

// Annualized MedRV volatility of dY, estimated from `rows`.
double response_vol(const Increments& inc, std::span<const int> rows) {
  const double vol = annualized_medrv_vol(inc.response, inc.delta, rows);
  if (!(vol > 0.0)) fail(ErrorKind::DegenerateMedRV, "zero MedRV for the response");
  return vol;
}

// sqrt(medrv(dY)) on the full window.
double response_scale(const Increments& inc, std::span<const int> rows) {
  return response_vol(inc, rows) * std::sqrt(inc.horizon());
}

}  // namespace

double make_tau(const Increments& inc, double alpha_tau, std::span<const int> rows) {
  require(alpha_tau > 0.0, "alpha_tau must be positive");
  return alpha_tau * response_scale(inc, rows);
}

double make_tau(const PricePanel& panel, double alpha_tau) { return make_tau(increments(panel), alpha_tau); }

PenaltyConfig make_penalty(const Increments& inc, double alpha_tau, double level, std::span<const int> rows) {
  require(alpha_tau > 0.0, "alpha_tau must be positive");
  require(level >= 0.0, "penalty level must be nonnegative");
  const double s = response_scale(inc, rows);
  return PenaltyConfig::from_level(alpha_tau * s, level * s);
}

double standardized_max_level(const DesignSystem& system, const Increments& inc) {
  return max_block_gradient(system) / response_scale(inc, {});
}

std::vector<int> assign_folds(int n, int folds, std::uint64_t seed) {
  require(folds >= 2, "need at least 2 folds");
  require(n >= folds, "fewer intervals than folds");
  const int shift = static_cast<int>(seed % static_cast<std::uint64_t>(folds));
  std::vector<int> out(n);
  for (int i = 0; i < n; ++i) out[i] = (i + shift) % folds;
  return out;
}

std::vector<CvCell> default_grid(double max_level) {
  require(max_level > 0.0, "max level must be positive");
  std::vector<CvCell> grid;
  for (int k : {4, 6, 8, 12, 16})
    for (int l = 0; l < 12; ++l)
      grid.push_back({k, max_level * std::pow(10.0, -3.0 + 3.0 * l / 11.0)});
  return grid;
}

void choose_cells(CvReport& report) {
  const int cells = static_cast<int>(report.grid.size());
  report.chosen_min = -1;
  report.chosen_one_se = -1;
  for (int c = 0; c < cells; ++c)
    if (report.valid[c] && (report.chosen_min < 0 || report.per_cell_mse[c] < report.per_cell_mse[report.chosen_min]))
      report.chosen_min = c;
  if (report.chosen_min < 0) fail(ErrorKind::Singular, "every cross-validation cell failed");
  const double bound = report.per_cell_mse[report.chosen_min] + report.per_cell_se[report.chosen_min];
  for (int c = 0; c < cells; ++c) {
    if (!report.valid[c] || report.per_cell_mse[c] > bound) continue;
    if (report.chosen_one_se < 0) {
      report.chosen_one_se = c;
      continue;
    }
    const CvCell& a = report.grid[c];
    const CvCell& b = report.grid[report.chosen_one_se];
    const double la = report.penalized ? a.level : 0.0;
    const double lb = report.penalized ? b.level : 0.0;
    if (la > lb || (la == lb && a.basis_count < b.basis_count)) report.chosen_one_se = c;
  }
}

CvReport cross_validate(const Increments& inc, const std::vector<CvCell>& grid_in, const CvOptions& opt) {
  require(!grid_in.empty(), "cross-validation grid is empty");
  const int n = inc.interval_count();

  CvReport rep;
  rep.fold_count = opt.folds;
  rep.seed = opt.seed;
  rep.penalized = opt.penalized;
  rep.alpha_tau = opt.alpha_tau;
  rep.fold_assignment = assign_folds(n, opt.folds, opt.seed);
  if (opt.penalized) {
    rep.grid = grid_in;
  } else {
    for (const CvCell& c : grid_in) {
      const bool seen = std::any_of(rep.grid.begin(), rep.grid.end(),
                                    [&](const CvCell& g) { return g.basis_count == c.basis_count; });
      if (!seen) rep.grid.push_back({c.basis_count, 0.0});
    }
  }
  for (const CvCell& c : rep.grid) {
    require(c.basis_count >= opt.degree + 1, "grid basis count below degree + 1");
    require(c.level >= 0.0, "grid level must be nonnegative");
  }

  std::vector<int> ks;
  for (const CvCell& c : rep.grid)
    if (std::find(ks.begin(), ks.end(), c.basis_count) == ks.end()) ks.push_back(c.basis_count);

  const int cells = static_cast<int>(rep.grid.size());
  const int tasks = opt.folds * static_cast<int>(ks.size());
  // fold_mse(cell, fold); NaN marks a failed fit
  Eigen::MatrixXd fold_mse = Eigen::MatrixXd::Constant(cells, opt.folds, std::numeric_limits<double>::quiet_NaN());

#pragma omp parallel for schedule(dynamic)
  for (int task = 0; task < tasks; ++task) {
    const int f = task / static_cast<int>(ks.size());
    const int kn = ks[task % ks.size()];
    std::vector<int> train;
    BoolVector held(n);
    for (int i = 0; i < n; ++i) {
      held[i] = rep.fold_assignment[i] == f;
      if (!held[i]) train.push_back(i);
    }
    try {
      const TruncationSpec spec =
          opt.fixed_truncation ? *opt.fixed_truncation : make_truncation(inc, opt.truncation, train);
      const TruncatedIncrements all = truncate(inc, spec);
      const SplineBasis basis = SplineBasis::uniform(opt.degree, kn, inc.horizon());
      const DesignSystem full = build_design(all, basis);
      const DesignSystem fit_sys = build_design(zero_rows(all, held), basis);

      auto score = [&](const Eigen::VectorXd& gamma) {
        const Eigen::VectorXd pred = kernels::apply(full, gamma, kernels::Exec::Serial);
        double sse = 0.0;
        int count = 0;
        for (int i = 0; i < n; ++i) {
          if (!held[i] || !all.mask.row_kept(i)) continue;
          const double e = all.response[i] - pred[i];
          sse += e * e;
          ++count;
        }
        return count > 0 ? sse / count : std::numeric_limits<double>::quiet_NaN();
      };

      if (!opt.penalized) {
        std::optional<double> mse;
        try {
          mse = score(fit_ols(fit_sys).gamma_hat);
        } catch (const Error&) {
        }
        for (int c = 0; c < cells; ++c)
          if (rep.grid[c].basis_count == kn && mse) fold_mse(c, f) = *mse;
      } else {
        const SolverWorkspace workspace(fit_sys);
        for (int c = 0; c < cells; ++c) {
          if (rep.grid[c].basis_count != kn) continue;
          try {
            const PenaltyConfig cfg = make_penalty(inc, opt.alpha_tau, rep.grid[c].level, train);
            fold_mse(c, f) = score(dc_solve(workspace, cfg).gamma_star);
          } catch (const Error&) {
          }
        }
      }
    } catch (const Error&) {
    }
  }

  rep.per_cell_mse.assign(cells, std::numeric_limits<double>::quiet_NaN());
  rep.per_cell_se.assign(cells, std::numeric_limits<double>::quiet_NaN());
  rep.valid.assign(cells, false);
  for (int c = 0; c < cells; ++c) {
    const Eigen::VectorXd row = fold_mse.row(c);
    if (!row.allFinite()) continue;
    const double mean = row.mean();
    const double var = (row.array() - mean).square().sum() / (opt.folds - 1);
    rep.valid[c] = true;
    rep.per_cell_mse[c] = mean;
    rep.per_cell_se[c] = std::sqrt(var / opt.folds);
  }
  choose_cells(rep);
  return rep;
}

CvReport cross_validate(const PricePanel& panel, const TruncationSpec& spec, double alpha_tau,
                        const std::vector<CvCell>& grid, int folds, std::uint64_t seed, bool penalized) {
  CvOptions opt;
  opt.truncation = TruncationConfig{spec.exponent, spec.multiplier, spec.mode};
  opt.alpha_tau = alpha_tau;
  opt.folds = folds;
  opt.seed = seed;
  opt.penalized = penalized;
  return cross_validate(increments(panel), grid, opt);
}

}  // namespace splinebeta
