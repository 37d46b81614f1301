#include "splinebeta/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "splinebeta/error.hpp"

namespace splinebeta {

PricePanel::PricePanel(std::vector<double> times, Eigen::VectorXd response,
                       Eigen::MatrixXd covariates, std::vector<std::string> labels,
                       std::string response_label)
    : times_(std::move(times)),
      response_(std::move(response)),
      covariates_(std::move(covariates)),
      labels_(std::move(labels)),
      response_label_(std::move(response_label)) {
  const auto m = static_cast<Eigen::Index>(times_.size());
  require(m >= 4, "panel needs at least 4 observations (3 increments) for MedRV");
  require(response_.size() == m, "response length does not match time grid");
  require(covariates_.rows() == m, "covariate rows do not match time grid");
  require(covariates_.cols() >= 1, "panel needs at least one covariate");
  if (labels_.empty())
    for (Eigen::Index j = 0; j < covariates_.cols(); ++j) labels_.push_back("X" + std::to_string(j + 1));
  require(static_cast<Eigen::Index>(labels_.size()) == covariates_.cols(),
          "label count does not match covariate count");
  require(response_.allFinite() && covariates_.allFinite(), "panel contains non-finite values");

  delta_ = (times_.back() - times_.front()) / static_cast<double>(m - 1);
  require(delta_ > 0.0, "time grid must be strictly increasing");
  for (Eigen::Index i = 1; i < m; ++i) {
    const double step = times_[i] - times_[i - 1];
    require(step > 0.0, "time grid not strictly increasing at index " + std::to_string(i));
    require(std::abs(step - delta_) <= kSpacingTolerance * delta_,
            "non-uniform time spacing at index " + std::to_string(i));
  }
}

Increments increments(const PricePanel& panel) {
  const int n = panel.interval_count();
  Increments inc;
  inc.delta = panel.delta();
  inc.response = panel.response().tail(n) - panel.response().head(n);
  inc.covariates = panel.covariates().bottomRows(n) - panel.covariates().topRows(n);
  return inc;
}

namespace {

constexpr double kMedrvConstant = std::numbers::pi / (6.0 - 4.0 * std::numbers::sqrt3 + std::numbers::pi);

double median3(double a, double b, double c) {
  return std::max(std::min(a, b), std::min(std::max(a, b), c));
}

template <class Get>
double medrv_impl(std::size_t n, Get get) {
  if (n < 3) fail(ErrorKind::InvalidArgument, "medrv needs at least 3 returns");
  double sum = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double m = median3(std::abs(get(i - 1)), std::abs(get(i)), std::abs(get(i + 1)));
    sum += m * m;
  }
  const double nn = static_cast<double>(n);
  return kMedrvConstant * nn / (nn - 2.0) * sum;
}

}  // namespace

double medrv(std::span<const double> returns, double horizon) {
  require(horizon > 0.0, "medrv horizon must be positive");
  return medrv_impl(returns.size(), [&](std::size_t i) { return returns[i]; });
}

double medrv(const Eigen::Ref<const Eigen::VectorXd>& returns, double horizon) {
  return medrv(std::span<const double>(returns.data(), static_cast<std::size_t>(returns.size())), horizon);
}

const char* to_string(TruncationMode mode) noexcept {
  switch (mode) {
    case TruncationMode::Norm: return "norm";
    case TruncationMode::Componentwise: return "componentwise";
    case TruncationMode::Auto: return "auto";
  }
  return "unknown";
}

TruncationMode truncation_mode_from_string(const std::string& s) {
  if (s == "norm") return TruncationMode::Norm;
  if (s == "componentwise") return TruncationMode::Componentwise;
  if (s == "auto") return TruncationMode::Auto;
  fail(ErrorKind::InvalidArgument, "unknown truncation mode '" + s + "'");
}

TruncationMode default_truncation_mode(int covariate_count) noexcept {
  return covariate_count > 10 ? TruncationMode::Componentwise : TruncationMode::Norm;
}

TruncationSpec TruncationSpec::none(int covariate_count, TruncationMode mode) {
  TruncationSpec spec;
  spec.mode = mode == TruncationMode::Auto ? default_truncation_mode(covariate_count) : mode;
  spec.response_threshold = std::numeric_limits<double>::infinity();
  spec.covariate_thresholds =
      Eigen::VectorXd::Constant(covariate_count, std::numeric_limits<double>::infinity());
  return spec;
}

double annualized_medrv_vol(const Eigen::Ref<const Eigen::VectorXd>& returns, double delta,
                            std::span<const int> rows) {
  require(delta > 0.0, "delta must be positive");
  if (rows.empty()) {
    const double horizon = delta * static_cast<double>(returns.size());
    return std::sqrt(medrv(returns, horizon) / horizon);
  }
  const double horizon = delta * static_cast<double>(rows.size());
  const double iv = medrv_impl(rows.size(), [&](std::size_t i) { return returns[rows[i]]; });
  return std::sqrt(iv / horizon);
}

TruncationSpec make_truncation(const Increments& inc, const TruncationConfig& config,
                               std::span<const int> rows) {
  require(config.exponent > 0.0 && config.exponent < 0.5, "truncation exponent must lie in (0, 1/2)");
  require(config.multiplier > 0.0, "truncation multiplier must be positive");
  const int p = inc.covariate_count();
  const double scale = config.multiplier * std::pow(inc.delta, config.exponent);

  auto vol_of = [&](const Eigen::Ref<const Eigen::VectorXd>& r, const std::string& name) {
    const double vol = annualized_medrv_vol(r, inc.delta, rows);
    if (!(vol > 0.0)) fail(ErrorKind::DegenerateMedRV, "zero MedRV for series " + name);
    return vol;
  };

  TruncationSpec spec;
  spec.exponent = config.exponent;
  spec.multiplier = config.multiplier;
  spec.mode = config.mode == TruncationMode::Auto ? default_truncation_mode(p) : config.mode;
  spec.response_threshold = scale * vol_of(inc.response, "response");
  spec.covariate_thresholds.resize(p);
  if (spec.mode == TruncationMode::Norm) {
    spec.covariate_thresholds.setConstant(spec.response_threshold);
  } else {
    for (int j = 0; j < p; ++j)
      spec.covariate_thresholds[j] = scale * vol_of(inc.covariates.col(j), "covariate " + std::to_string(j));
  }
  return spec;
}

TruncationSpec make_truncation(const PricePanel& panel, double exponent, double multiplier,
                               TruncationMode mode) {
  return make_truncation(increments(panel), TruncationConfig{exponent, multiplier, mode});
}

int KeepMask::kept_row_count() const {
  int count = 0;
  for (Eigen::Index i = 0; i < response.size(); ++i) count += row_kept(static_cast<int>(i)) ? 1 : 0;
  return count;
}

KeepMask apply_truncation(const Eigen::Ref<const Eigen::VectorXd>& dy,
                          const Eigen::Ref<const Eigen::MatrixXd>& dx, const TruncationSpec& spec) {
  require(dy.size() == dx.rows(), "response and covariate increments differ in length");
  require(spec.covariate_thresholds.size() == dx.cols(), "threshold count does not match covariates");
  const Eigen::Index n = dx.rows();
  const Eigen::Index p = dx.cols();

  KeepMask mask;
  mask.mode = spec.mode;
  mask.response.resize(n);
  mask.covariates.resize(n, p);
  if (spec.mode == TruncationMode::Norm) {
    const double u = spec.covariate_thresholds.size() > 0 ? spec.covariate_thresholds[0] : 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool keep = std::abs(dy[i]) <= spec.response_threshold && dx.row(i).norm() <= u;
      mask.response[i] = keep;
      mask.covariates.row(i).setConstant(keep);
    }
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      mask.response[i] = std::abs(dy[i]) <= spec.response_threshold;
      for (Eigen::Index j = 0; j < p; ++j)
        mask.covariates(i, j) = std::abs(dx(i, j)) <= spec.covariate_thresholds[j];
    }
  }
  return mask;
}

TruncatedIncrements truncate(const Increments& inc, const TruncationSpec& spec) {
  TruncatedIncrements out;
  out.delta = inc.delta;
  out.mask = apply_truncation(inc.response, inc.covariates, spec);
  out.response = inc.response;
  out.covariates = inc.covariates;
  for (Eigen::Index i = 0; i < out.response.size(); ++i) {
    if (!out.mask.response[i]) out.response[i] = 0.0;
    for (Eigen::Index j = 0; j < out.covariates.cols(); ++j)
      if (!out.mask.covariates(i, j)) out.covariates(i, j) = 0.0;
  }
  return out;
}

}  // namespace splinebeta
