#include "splinebeta/spline_basis.hpp"

#include <algorithm>
#include <string>

#include "splinebeta/error.hpp"

namespace splinebeta {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::OutOfRange: return "out_of_range";
    case ErrorKind::DegenerateMedRV: return "degenerate_medrv";
    case ErrorKind::Singular: return "singular";
    case ErrorKind::LeverageOne: return "leverage_one";
    case ErrorKind::NonConvergence: return "non_convergence";
    case ErrorKind::EmptyKeptSet: return "empty_kept_set";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

SplineBasis::SplineBasis(int degree, int basis_count, double horizon, std::vector<double> knots)
    : degree_(degree), basis_count_(basis_count), horizon_(horizon), knots_(std::move(knots)) {}

SplineBasis SplineBasis::uniform(int degree, int basis_count, double horizon) {
  require(degree >= 0, "spline degree must be nonnegative");
  require(basis_count >= degree + 1,
          "basis_count " + std::to_string(basis_count) + " < degree + 1 = " +
              std::to_string(degree + 1) + ": no valid knot sequence");
  require(horizon > 0.0, "spline horizon must be positive");

  const int interior = basis_count - degree - 1;
  std::vector<double> knots;
  knots.reserve(basis_count + degree + 1);
  for (int i = 0; i <= degree; ++i) knots.push_back(0.0);
  for (int j = 1; j <= interior; ++j)
    knots.push_back(horizon * static_cast<double>(j) / static_cast<double>(interior + 1));
  for (int i = 0; i <= degree; ++i) knots.push_back(horizon);
  return SplineBasis(degree, basis_count, horizon, std::move(knots));
}

void SplineBasis::check_domain(double t) const {
  if (!(t >= 0.0 && t <= horizon_))
    fail(ErrorKind::OutOfRange,
         "evaluation point " + std::to_string(t) + " outside [0, " + std::to_string(horizon_) + "]");
}

int SplineBasis::find_span(double t) const {
  const int last = basis_count_ - 1;
  if (t >= knots_[last + 1]) return last;
  // first knot strictly greater than t, searched over the span range
  auto begin = knots_.begin() + degree_;
  auto end = knots_.begin() + last + 2;
  auto it = std::upper_bound(begin, end, t);
  return static_cast<int>(it - knots_.begin()) - 1;
}

Eigen::VectorXd SplineBasis::local_values(int span, double t, int deg) const {
  Eigen::VectorXd n(deg + 1);
  Eigen::VectorXd left(deg + 1), right(deg + 1);
  n[0] = 1.0;
  for (int j = 1; j <= deg; ++j) {
    left[j] = t - knots_[span + 1 - j];
    right[j] = knots_[span + j] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double denom = right[r + 1] + left[j - r];
      const double temp = denom > 0.0 ? n[r] / denom : 0.0;
      n[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    n[j] = saved;
  }
  return n;
}

LocalBasis SplineBasis::evaluate_local(double t) const {
  check_domain(t);
  const int span = find_span(t);
  return LocalBasis{span - degree_, local_values(span, t, degree_)};
}

Eigen::VectorXd SplineBasis::evaluate(double t) const {
  const LocalBasis local = evaluate_local(t);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(basis_count_);
  out.segment(local.first, local.values.size()) = local.values;
  return out;
}

Eigen::VectorXd SplineBasis::evaluate_derivative(double t) const {
  require(degree_ >= 1, "basis derivative undefined for degree 0");
  check_domain(t);
  const int span = find_span(t);
  // degree d-1 functions span-d+1 .. span
  const Eigen::VectorXd lower = local_values(span, t, degree_ - 1);
  auto lower_at = [&](int i) {
    const int off = i - (span - degree_ + 1);
    return (off >= 0 && off < lower.size()) ? lower[off] : 0.0;
  };
  Eigen::VectorXd out = Eigen::VectorXd::Zero(basis_count_);
  const double d = degree_;
  for (int i = span - degree_; i <= span; ++i) {
    const double a = knots_[i + degree_] - knots_[i];
    const double b = knots_[i + degree_ + 1] - knots_[i + 1];
    double v = 0.0;
    if (a > 0.0) v += d / a * lower_at(i);
    if (b > 0.0) v -= d / b * lower_at(i + 1);
    out[i] = v;
  }
  return out;
}

Eigen::MatrixXd SplineBasis::block_matrix(double t, int block_count) const {
  require(block_count >= 1, "block_matrix needs at least one block");
  const Eigen::VectorXd row = evaluate(t);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(block_count, block_count * basis_count_);
  for (int j = 0; j < block_count; ++j) out.block(j, j * basis_count_, 1, basis_count_) = row.transpose();
  return out;
}

}  // namespace splinebeta
