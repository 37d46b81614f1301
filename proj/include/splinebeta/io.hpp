#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "splinebeta/bench_analytics.hpp"
#include "splinebeta/error.hpp"
#include "splinebeta/preprocess.hpp"
#include "splinebeta/simulator.hpp"
#include "splinebeta/spline_ols.hpp"
#include "splinebeta/tlp_select.hpp"
#include "splinebeta/tuning.hpp"

namespace splinebeta::io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Relative tolerance on the CSV time grid; accepted grids are snapped to exact
/// uniform spacing.
inline constexpr double kCsvSpacingTolerance = 1e-6;

/// Parse `time,<response>,<cov1>,...`. Throws Parse naming the row and column
/// for ragged rows, bad or NaN cells, non-increasing or non-uniform times.
PricePanel parse_csv(const std::string& text);
PricePanel ingest_csv(const std::string& path);

std::string format_csv(const PricePanel& panel);
void export_csv(const PricePanel& panel, const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

/// Scenario files. `{"preset": "default", "p": 10, "seed": 7}` expands to the
/// default design; every other field overrides it.
SimulationSpec simulation_spec_from_json(const json& j);
json to_json(const SimulationSpec& spec);

json to_json(const TruncationSpec& spec);
json to_json(const SimulationTruth& truth);
json to_json(const FitResult& fit, const std::vector<std::string>& labels);
json to_json(const SelectionResult& sel, const std::vector<std::string>& labels);
json to_json(const KktReport& rep);
json to_json(const CvReport& rep);
json to_json(const EstimatorSpec& est);
json to_json(const BenchmarkReport& rep);
json to_json(const std::vector<GridPoint>& grid);
json to_json(const RiskDecomposition& risk);

/// Wrap a payload with its schema name, version and the config snapshot.
json envelope(const std::string& schema, json payload, json config);

json error_json(ErrorKind kind, const std::string& message);

/// Table layouts: estimator, component, bias, stdev, rmse ("-" for dashes).
std::string estimation_table_csv(const BenchmarkReport& rep);
/// estimator, relevant, irrelevant, correct.
std::string selection_table_csv(const BenchmarkReport& rep);
/// basis_count, level, tdr, fdr (long format).
std::string grid_csv(const std::vector<GridPoint>& grid);
/// t, beta_1..beta_p on the sampling grid.
std::string beta_path_csv(const FitResult& fit, const std::vector<std::string>& labels);

}  // namespace splinebeta::io
