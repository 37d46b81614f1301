#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "splinebeta/simulator.hpp"
#include "splinebeta/spline_ols.hpp"
#include "splinebeta/tuning.hpp"

namespace splinebeta {

enum class EstimatorKind { SplineOls, SplineMinNorm, SplineTlp, Akx };

const char* to_string(EstimatorKind kind) noexcept;
EstimatorKind estimator_kind_from_string(const std::string& s);

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::SplineOls;
  std::string name;
  int basis_count = 0;      // 0: median of warm-up CV choices
  double alpha_tau = 0.01;  // penalized only
  double level = -1.0;      // standardized; negative: median of warm-up CV choices
  int window = 78;          // AKX only
  int warmup_paths = -1;    // negative: BenchmarkOptions::warmup_paths
};

struct BenchmarkOptions {
  SimulationSpec sim;
  int replications = 200;
  TruncationConfig truncation{0.47, 3.0, TruncationMode::Auto};
  int degree = 3;
  int warmup_paths = 20;
  int cv_folds = 5;
  bool one_se = false;  // warm-up picks the one-SE cell instead of the CV minimum
  std::vector<int> kn_grid{4, 6, 8, 12, 16};
  int level_points = 12;
  std::vector<EstimatorSpec> estimators;
};

/// Monte Carlo statistics of one component, in percent of the time-averaged beta.
struct ComponentStats {
  double bias = 0.0;
  double stdev = 0.0;
  double rmse = 0.0;
};

struct EstimatorSummary {
  EstimatorSpec spec;        // with tuned values filled in
  int successes = 0;
  int failures = 0;
  std::string first_failure;
  std::vector<ComponentStats> stats;  // q entries; meaningful only when failures == 0
  std::vector<CvCell> warmup_choices;
  // penalized estimators only
  double relevant_rate = 0.0;
  double irrelevant_rate = 0.0;
  double correct_rate = 0.0;
  int descent_violations = 0;
  std::vector<std::vector<int>> active_sets;

  bool dash() const noexcept { return failures > 0; }
};

struct BenchmarkReport {
  BenchmarkOptions options;
  std::vector<EstimatorSummary> estimators;
  Eigen::VectorXd mean_qv_shares;
  double runtime_seconds = 0.0;
};

/// Per-replication scaled errors 100 * (estimate - truth) / T for the q relevant
/// components. RMSE comes from the raw errors, stdev uses the R-1 divisor.
std::vector<ComponentStats> summarize_errors(const std::vector<Eigen::VectorXd>& errors);

/// Fill tuned values (basis count, level) from warm-up cross-validation.
EstimatorSpec tune_estimator(const BenchmarkOptions& options, const EstimatorSpec& est,
                             std::vector<CvCell>* choices = nullptr);

BenchmarkReport run_benchmark(const BenchmarkOptions& options);
BenchmarkReport run_estimation_benchmark(const SimulationSpec& spec, const std::vector<EstimatorSpec>& estimators,
                                         int replications, std::uint64_t seed);
BenchmarkReport run_selection_benchmark(const SimulationSpec& spec, const std::vector<EstimatorSpec>& tlp_configs,
                                        int replications, std::uint64_t seed);

struct GridPoint {
  int basis_count = 0;
  double level = 0.0;
  double tdr = 0.0;
  double fdr = 0.0;
  int failures = 0;
};

struct GridOptions {
  SimulationSpec sim;
  std::vector<int> kn_list;
  std::vector<double> levels;
  int replications = 100;
  double alpha_tau = 0.05;
  TruncationConfig truncation{0.47, 3.0, TruncationMode::Auto};
  int degree = 3;
};

/// Selection frequencies per (K, level) cell, row-major over kn_list then levels.
std::vector<GridPoint> tdr_fdr_grid(const GridOptions& options);

struct RiskDecomposition {
  double total_qv = 0.0;
  double integrated_variance = 0.0;
  double unexplained_iv = 0.0;
  double r_squared = 0.0;
  bool negative_r_squared = false;
  std::string window;
};

/// Throws InvalidArgument when the truncated variance is zero.
RiskDecomposition risk_decompose(const PricePanel& panel, const FitResult& fit, const TruncationSpec& spec,
                                 std::string window = "");

}  // namespace splinebeta
