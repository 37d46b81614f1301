#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"

#include "splinebeta/error.hpp"
#include "splinebeta/preprocess.hpp"
#include "support/oracles.hpp"

using namespace splinebeta;

namespace {

const double kMedrvConst = std::numbers::pi / (6.0 - 4.0 * std::numbers::sqrt3 + std::numbers::pi);

PricePanel constant_panel(int n) {
  std::vector<double> t(n + 1);
  for (int i = 0; i <= n; ++i) t[i] = i * 0.01;
  return PricePanel(t, Eigen::VectorXd::Constant(n + 1, 4.2), Eigen::MatrixXd::Constant(n + 1, 2, -1.0), {});
}

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;  // sentinel: nothing thrown
}

}  // namespace

TEST_CASE("panel validation") {
  std::vector<double> t{0.0, 0.1, 0.2, 0.3};
  Eigen::VectorXd y = Eigen::VectorXd::Zero(4);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, 1);
  CHECK_NOTHROW(PricePanel(t, y, x, {"a"}));
  CHECK_THROWS_AS(PricePanel({0.0, 0.1, 0.2}, y.head(3), x.topRows(3), {"a"}), Error);
  CHECK_THROWS_AS(PricePanel({0.0, 0.1, 0.25, 0.3}, y, x, {"a"}), Error);
  CHECK_THROWS_AS(PricePanel({0.0, 0.2, 0.1, 0.3}, y, x, {"a"}), Error);
  CHECK_THROWS_AS(PricePanel(t, y, x, {"a", "b"}), Error);
  Eigen::VectorXd bad = y;
  bad[2] = std::nan("");
  CHECK_THROWS_AS(PricePanel(t, bad, x, {"a"}), Error);
  const PricePanel ok(t, y, x, {});
  CHECK(ok.labels().front() == "X1");
  CHECK(ok.interval_count() == 3);
  CHECK(ok.horizon() == doctest::Approx(0.3));
}

TEST_CASE("increments") {
  const Increments flat = increments(constant_panel(10));
  CHECK(flat.response.cwiseAbs().maxCoeff() == 0.0);
  CHECK(flat.covariates.cwiseAbs().maxCoeff() == 0.0);

  std::vector<double> t(11);
  Eigen::VectorXd y(11);
  for (int i = 0; i <= 10; ++i) {
    t[i] = i * 0.5;
    y[i] = 0.3 * t[i];
  }
  const Increments lin = increments(PricePanel(t, y, Eigen::MatrixXd::Zero(11, 1), {}));
  for (int i = 0; i < 10; ++i) CHECK(lin.response[i] == doctest::Approx(0.15).epsilon(1e-14));

  const PricePanel rnd = oracles::random_panel(200, 3, 5);
  const Increments inc = increments(rnd);
  for (int j = 0; j < 3; ++j)
    CHECK(inc.covariates.col(j).sum() ==
          doctest::Approx(rnd.covariates()(200, j) - rnd.covariates()(0, j)).epsilon(1e-12));
}

TEST_CASE("medrv closed forms") {
  CHECK(medrv(Eigen::VectorXd::Zero(10), 1.0) == 0.0);
  const int n = 25;
  const double c = 0.013;
  CHECK(medrv(Eigen::VectorXd::Constant(n, c), 1.0) == doctest::Approx(kMedrvConst * n * c * c).epsilon(1e-14));
  CHECK_THROWS_AS(medrv(Eigen::VectorXd::Zero(2), 1.0), Error);
}

TEST_CASE("medrv is invariant to sign flips and reversal") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  Eigen::VectorXd r(300);
  for (auto& v : r) v = z(rng);
  const double base = medrv(r, 1.0);
  Eigen::VectorXd flipped = r;
  for (int i = 0; i < r.size(); i += 3) flipped[i] = -flipped[i];
  CHECK(medrv(flipped, 1.0) == base);
  CHECK(medrv(Eigen::VectorXd(r.reverse()), 1.0) == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("medrv consistency on Gaussian returns") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> z;
  const int n = 10000;
  const double sigma = 0.3, horizon = 1.0, dt = horizon / n;
  double total = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd r(n);
    for (auto& v : r) v = sigma * std::sqrt(dt) * z(rng);
    total += medrv(r, horizon) / horizon;
  }
  CHECK(total / 100 == doctest::Approx(sigma * sigma).epsilon(0.05));
}

TEST_CASE("thresholds follow the multiplier, delta power and MedRV scale") {
  const PricePanel panel = oracles::random_panel(400, 3, 9, {1.0, 0.5}, 0.2, 21.0 / 252.0);
  const Increments inc = increments(panel);
  const TruncationSpec s = make_truncation(inc, {0.47, 3.0, TruncationMode::Componentwise});
  const double scale = 3.0 * std::pow(inc.delta, 0.47);
  CHECK(s.response_threshold ==
        doctest::Approx(scale * std::sqrt(medrv(inc.response, inc.horizon()) / inc.horizon())).epsilon(1e-14));
  for (int j = 0; j < 3; ++j)
    CHECK(s.covariate_thresholds[j] ==
          doctest::Approx(scale * std::sqrt(medrv(Eigen::VectorXd(inc.covariates.col(j)), 1.0) / inc.horizon()))
              .epsilon(1e-14));
  const TruncationSpec doubled = make_truncation(inc, {0.47, 6.0, TruncationMode::Componentwise});
  CHECK(doubled.response_threshold == doctest::Approx(2 * s.response_threshold).epsilon(1e-15));
  CHECK((doubled.covariate_thresholds - 2 * s.covariate_thresholds).cwiseAbs().maxCoeff() <= 1e-15);

  const TruncationSpec norm = make_truncation(inc, {0.47, 3.0, TruncationMode::Norm});
  CHECK((norm.covariate_thresholds.array() == norm.response_threshold).all());

  CHECK(make_truncation(inc, {0.47, 3.0, TruncationMode::Auto}).mode == TruncationMode::Norm);
  CHECK(default_truncation_mode(10) == TruncationMode::Norm);
  CHECK(default_truncation_mode(11) == TruncationMode::Componentwise);

  CHECK_THROWS_AS(make_truncation(inc, {0.5, 3.0, TruncationMode::Norm}), Error);
  CHECK_THROWS_AS(make_truncation(inc, {0.47, 0.0, TruncationMode::Norm}), Error);
}

TEST_CASE("degenerate MedRV is a distinct error") {
  const Increments inc = increments(constant_panel(20));
  CHECK(kind_of([&] { make_truncation(inc, TruncationConfig{}); }) == ErrorKind::DegenerateMedRV);
}

TEST_CASE("constant-volatility thresholds scale with sigma") {
  auto threshold = [](double sigma) {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> z;
    const int n = 5000;
    const double dt = 1.0 / n;
    Increments inc;
    inc.delta = dt;
    inc.response.resize(n);
    inc.covariates.resize(n, 1);
    for (int i = 0; i < n; ++i) {
      inc.response[i] = sigma * std::sqrt(dt) * z(rng);
      inc.covariates(i, 0) = 0.2 * std::sqrt(dt) * z(rng);
    }
    return make_truncation(inc, {0.47, 3.0, TruncationMode::Componentwise}).response_threshold;
  };
  const double expected = 3.0 * std::pow(1.0 / 5000, 0.47);
  CHECK(threshold(0.1) / 0.1 == doctest::Approx(expected).epsilon(0.05));
  CHECK(threshold(0.4) / 0.4 == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("apply_truncation semantics") {
  Eigen::VectorXd dy(4);
  dy << 0.1, -0.5, 0.2, 0.0;
  Eigen::MatrixXd dx(4, 2);
  dx << 0.1, 0.1, 0.0, 0.0, 0.3, 0.0, 0.0, -0.9;

  TruncationSpec comp = TruncationSpec::none(2);
  comp.response_threshold = 0.3;
  comp.covariate_thresholds << 0.25, 0.5;
  const KeepMask m = apply_truncation(dy, dx, comp);
  CHECK(m.response[0]);
  CHECK_FALSE(m.response[1]);
  CHECK(m.response[2]);
  CHECK_FALSE(m.covariates(2, 0));
  CHECK(m.covariates(2, 1));
  CHECK_FALSE(m.covariates(3, 1));
  CHECK(m.kept_row_count() == 1);

  const KeepMask zeros = apply_truncation(Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Zero(4, 2), comp);
  CHECK(zeros.response.all());
  CHECK(zeros.covariates.all());

  const KeepMask inf = apply_truncation(dy, dx, TruncationSpec::none(2));
  CHECK(inf.kept_row_count() == 4);

  TruncationSpec norm = TruncationSpec::none(2, TruncationMode::Norm);
  norm.response_threshold = 0.3;
  norm.covariate_thresholds.setConstant(0.2);
  const KeepMask nm = apply_truncation(dy, dx, norm);
  CHECK(nm.response[0]);  // ||(0.1, 0.1)|| < 0.2
  CHECK_FALSE(nm.response[1]);
  CHECK_FALSE(nm.response[2]);
  CHECK_FALSE(nm.response[3]);
  for (int i = 0; i < 4; ++i) CHECK((nm.covariates.row(i) == nm.response[i]).all());
}

TEST_CASE("enlarging thresholds never drops a kept flag") {
  const PricePanel panel = oracles::random_panel(500, 4, 31, {1.0}, 0.3);
  const Increments inc = increments(panel);
  const TruncationSpec s = make_truncation(inc, {0.47, 1.0, TruncationMode::Componentwise});
  TruncationSpec bigger = s;
  bigger.response_threshold *= 1.5;
  bigger.covariate_thresholds[2] *= 3.0;
  const KeepMask a = apply_truncation(inc.response, inc.covariates, s);
  const KeepMask b = apply_truncation(inc.response, inc.covariates, bigger);
  CHECK((!a.response || b.response).all());
  CHECK((!a.covariates || b.covariates).all());
}

TEST_CASE("scaling the response scales MedRV and its threshold") {
  const PricePanel panel = oracles::random_panel(300, 2, 41, {0.7}, 0.3);
  Increments inc = increments(panel);
  const TruncationSpec s = make_truncation(inc, {0.47, 2.0, TruncationMode::Componentwise});
  const double c = 3.5;
  const double m0 = medrv(inc.response, 1.0);
  inc.response *= c;
  CHECK(medrv(inc.response, 1.0) == doctest::Approx(c * c * m0).epsilon(1e-13));
  const TruncationSpec sc = make_truncation(inc, {0.47, 2.0, TruncationMode::Componentwise});
  CHECK(sc.response_threshold == doctest::Approx(c * s.response_threshold).epsilon(1e-13));
  const KeepMask a = apply_truncation(inc.response / c, inc.covariates, s);
  const KeepMask b = apply_truncation(inc.response, inc.covariates, sc);
  CHECK((a.response == b.response).all());
}

TEST_CASE("truncate zeroes dropped entries") {
  const PricePanel panel = oracles::random_panel(300, 2, 43, {0.7}, 0.3);
  const Increments inc = increments(panel);
  const TruncationSpec s = make_truncation(inc, {0.47, 0.8, TruncationMode::Componentwise});
  const TruncatedIncrements t = truncate(inc, s);
  int dropped = 0;
  for (int i = 0; i < t.interval_count(); ++i) {
    if (!t.mask.response[i]) {
      CHECK(t.response[i] == 0.0);
      ++dropped;
    } else {
      CHECK(t.response[i] == inc.response[i]);
    }
    for (int j = 0; j < 2; ++j)
      CHECK(t.covariates(i, j) == (t.mask.covariates(i, j) ? inc.covariates(i, j) : 0.0));
  }
  CHECK(dropped > 0);
}

TEST_CASE("truncation mode names") {
  CHECK(truncation_mode_from_string("norm") == TruncationMode::Norm);
  CHECK(truncation_mode_from_string("componentwise") == TruncationMode::Componentwise);
  CHECK(truncation_mode_from_string("auto") == TruncationMode::Auto);
  CHECK(std::string(to_string(TruncationMode::Auto)) == "auto");
  CHECK_THROWS_AS(truncation_mode_from_string("both"), Error);
}
