#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace splinebeta {

using BoolVector = Eigen::Array<bool, Eigen::Dynamic, 1>;
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Synchronized log-price levels of one response and p covariates observed on
/// a uniform grid t_0 < ... < t_n. Validated on construction.
class PricePanel {
 public:
  PricePanel(std::vector<double> times, Eigen::VectorXd response, Eigen::MatrixXd covariates,
             std::vector<std::string> labels, std::string response_label = "Y");

  int interval_count() const noexcept { return static_cast<int>(times_.size()) - 1; }
  int covariate_count() const noexcept { return static_cast<int>(covariates_.cols()); }
  double delta() const noexcept { return delta_; }
  /// T = n * delta, the span of the grid.
  double horizon() const noexcept { return delta_ * interval_count(); }

  const std::vector<double>& times() const noexcept { return times_; }
  const Eigen::VectorXd& response() const noexcept { return response_; }
  const Eigen::MatrixXd& covariates() const noexcept { return covariates_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::string& response_label() const noexcept { return response_label_; }

  /// Relative spacing tolerance enforced on the time grid.
  static constexpr double kSpacingTolerance = 1e-9;

 private:
  std::vector<double> times_;
  Eigen::VectorXd response_;
  Eigen::MatrixXd covariates_;
  std::vector<std::string> labels_;
  std::string response_label_;
  double delta_ = 0.0;
};

/// First differences over each interval; row i is interval i+1.
struct Increments {
  Eigen::VectorXd response;    // n
  Eigen::MatrixXd covariates;  // n x p
  double delta = 0.0;

  int interval_count() const noexcept { return static_cast<int>(response.size()); }
  int covariate_count() const noexcept { return static_cast<int>(covariates.cols()); }
  double horizon() const noexcept { return delta * interval_count(); }
};

Increments increments(const PricePanel& panel);

/// Median realized variance over the window covered by `returns`:
/// (pi / (6 - 4 sqrt 3 + pi)) * n/(n-2) * sum med(|r_{i-1}|, |r_i|, |r_{i+1}|)^2.
/// Throws InvalidArgument for fewer than 3 returns.
double medrv(std::span<const double> returns, double horizon);
double medrv(const Eigen::Ref<const Eigen::VectorXd>& returns, double horizon);

/// Auto resolves to default_truncation_mode(p) when thresholds are built.
enum class TruncationMode { Norm, Componentwise, Auto };

const char* to_string(TruncationMode mode) noexcept;
TruncationMode truncation_mode_from_string(const std::string& s);

/// How thresholds are derived from data: u = multiplier * delta^exponent * vol,
/// where vol is the annualized MedRV volatility of the series.
struct TruncationConfig {
  double exponent = 0.47;
  double multiplier = 3.0;
  TruncationMode mode = TruncationMode::Auto;
};

/// Default mode for p covariates: norm truncation up to 10, componentwise above.
TruncationMode default_truncation_mode(int covariate_count) noexcept;

struct TruncationSpec {
  double exponent = 0.47;
  double multiplier = 3.0;
  TruncationMode mode = TruncationMode::Componentwise;
  double response_threshold = 0.0;
  Eigen::VectorXd covariate_thresholds;

  /// Infinite thresholds: every increment is kept.
  static TruncationSpec none(int covariate_count, TruncationMode mode = TruncationMode::Componentwise);
};

/// sqrt(medrv / horizon) over the selected rows (all rows if `rows` is empty).
double annualized_medrv_vol(const Eigen::Ref<const Eigen::VectorXd>& returns, double delta,
                            std::span<const int> rows = {});

/// Thresholds from the MedRV of each series over `rows` (all rows if empty).
/// Throws DegenerateMedRV when a series used for a threshold has zero MedRV.
TruncationSpec make_truncation(const Increments& inc, const TruncationConfig& config,
                               std::span<const int> rows = {});
TruncationSpec make_truncation(const PricePanel& panel, double exponent, double multiplier,
                               TruncationMode mode);

/// Keep flags. In norm mode the response flag is the joint row flag and every
/// covariate flag in a row equals it.
struct KeepMask {
  TruncationMode mode = TruncationMode::Componentwise;
  BoolVector response;    // n
  BoolMatrix covariates;  // n x p

  /// Joint indicator: response kept and every covariate entry kept.
  bool row_kept(int i) const { return response[i] && covariates.row(i).all(); }
  int kept_row_count() const;
};

KeepMask apply_truncation(const Eigen::Ref<const Eigen::VectorXd>& dy,
                          const Eigen::Ref<const Eigen::MatrixXd>& dx, const TruncationSpec& spec);

/// Increments with truncated entries replaced by exact zeros.
struct TruncatedIncrements {
  Eigen::VectorXd response;
  Eigen::MatrixXd covariates;
  KeepMask mask;
  double delta = 0.0;

  int interval_count() const noexcept { return static_cast<int>(response.size()); }
  int covariate_count() const noexcept { return static_cast<int>(covariates.cols()); }
  double horizon() const noexcept { return delta * interval_count(); }
};

TruncatedIncrements truncate(const Increments& inc, const TruncationSpec& spec);

}  // namespace splinebeta
