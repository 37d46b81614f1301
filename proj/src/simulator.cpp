#include "splinebeta/simulator.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "splinebeta/error.hpp"

namespace splinebeta {

SimulationSpec SimulationSpec::default_design(int p, std::uint64_t seed, std::uint64_t param_seed) {
  require(p >= 3, "the default design needs at least 3 covariates");
  SimulationSpec spec;
  spec.p = p;
  spec.q = 3;
  spec.seed = seed;
  const double sd = std::sqrt(spec.delta);

  std::mt19937_64 rng(param_seed);
  auto unif = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  spec.factors.resize(p);
  for (int j = 0; j < p; ++j) {
    FactorParams& f = spec.factors[j];
    if (j >= 3) {
      f.drift = unif(0.03, 0.07);
      f.sigma0_sq = unif(0.06, 0.15);
      f.kappa_v = unif(3.0, 5.0);
      f.alpha_v = unif(0.04, 0.09);
      f.vol_of_vol = unif(0.3, 0.4);
    }
    f.omega = 0.5;
    f.g_plus = 7.0 * std::sqrt(f.sigma0_sq) * sd;
    f.g_minus = f.g_plus;
    f.g_vol = unif(0.004, 0.005);
  }
  const double alphas[3] = {0.7, -0.5, 0.3};
  for (double a : alphas) spec.betas.push_back({2.0, a, 0.1, a});
  spec.idio.sigma = 0.35;
  spec.idio.g_plus = 14.0 * spec.idio.sigma * sd;
  spec.idio.g_minus = spec.idio.g_plus;
  spec.idio.intensity = 67.0;
  return spec;
}

void SimulationSpec::validate() const {
  require(p >= 1, "simulation needs at least one covariate");
  require(q >= 0 && q <= p, "relevant count must lie in [0, p]");
  require(delta > 0.0, "simulation step must be positive");
  require(intervals >= 3, "simulation needs at least 3 intervals");
  require(static_cast<int>(factors.size()) == p, "factor parameter count must equal p");
  require(static_cast<int>(betas.size()) == q, "beta parameter count must equal q");
  require(jump_intensity >= 0.0 && idio.intensity >= 0.0, "jump intensities must be nonnegative");
  for (const FactorParams& f : factors) {
    require(f.sigma0_sq >= 0.0, "initial variance must be nonnegative");
    require(f.omega >= 0.0 && f.omega <= 1.0, "jump sign probability must lie in [0, 1]");
    require(f.g_plus >= 0.0 && f.g_minus >= 0.0 && f.g_vol >= 0.0, "jump means must be nonnegative");
  }
  for (const BetaParams& b : betas) require(b.kappa >= 0.0 && b.vol >= 0.0, "beta parameters must be nonnegative");
}

Eigen::MatrixXd toeplitz_correlation(int p, double r) {
  require(p >= 1, "correlation size must be positive");
  require(std::abs(r) < 1.0, "Toeplitz parameter must satisfy |r| < 1");
  Eigen::MatrixXd c(p, p);
  for (int j = 0; j < p; ++j)
    for (int k = 0; k < p; ++k) c(j, k) = std::pow(r, std::abs(j - k));
  return c;
}

namespace {

bool pd_with_margin(const Eigen::MatrixXd& m, double margin) {
  if (m.rows() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() > margin;
}

}  // namespace

Eigen::MatrixXd block_latent_correlation(int p, int q, int latent_dim, std::uint64_t seed, double forced_kappa,
                                         double* kappa_out) {
  require(q >= 1 && q <= p, "relevant count must lie in [1, p]");
  require(latent_dim >= 1, "latent dimension must be positive");
  const int m = p - q;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u11(-1.0, 1.0);
  std::uniform_real_distribution<double> row_norm(0.2, 0.9);

  const Eigen::MatrixXd r11 = toeplitz_correlation(q, 0.15);
  Eigen::MatrixXd l(m, latent_dim);
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < latent_dim; ++k) l(i, k) = u11(rng);
    const double nrm = l.row(i).norm();
    const double target = row_norm(rng);
    if (nrm > 0.0) l.row(i) *= target / nrm;
  }
  Eigen::MatrixXd r22 = l * l.transpose();
  for (int i = 0; i < m; ++i) r22(i, i) = 1.0;
  Eigen::MatrixXd r12_star(q, m);
  for (int i = 0; i < q; ++i)
    for (int k = 0; k < m; ++k) r12_star(i, k) = u11(rng);

  const Eigen::MatrixXd s = r12_star.transpose() * r11.llt().solve(r12_star);
  auto schur_ok = [&](double kappa) { return pd_with_margin(r22 - kappa * kappa * s, 1e-8); };

  double kappa = forced_kappa;
  if (kappa < 0.0) {
    if (schur_ok(1.0)) {
      kappa = 1.0;
    } else {
      double lo = 0.0, hi = 1.0;
      if (!schur_ok(lo)) fail(ErrorKind::InvalidArgument, "latent block is not positive definite");
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (schur_ok(mid) ? lo : hi) = mid;
      }
      kappa = lo;
    }
  }
  if (kappa_out) *kappa_out = kappa;

  Eigen::MatrixXd c(p, p);
  c.topLeftCorner(q, q) = r11;
  c.bottomRightCorner(m, m) = r22;
  c.topRightCorner(q, m) = kappa * r12_star;
  c.bottomLeftCorner(m, q) = kappa * r12_star.transpose();
  return c;
}

Eigen::MatrixXd correlation_matrix(const SimulationSpec& spec) {
  if (spec.correlation.kind == CorrelationKind::Toeplitz) return toeplitz_correlation(spec.p, spec.correlation.r);
  return block_latent_correlation(spec.p, std::max(spec.q, 1), spec.correlation.latent_dim, spec.correlation.seed);
}

std::mt19937_64 child_rng(std::uint64_t seed, std::uint64_t replication) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replication), static_cast<std::uint32_t>(replication >> 32),
                    0x5bd1e995u};
  return std::mt19937_64(seq);
}

SimulationOutput simulate_panel(const SimulationSpec& spec, std::uint64_t replication) {
  spec.validate();
  const int p = spec.p, q = spec.q, n = spec.intervals;
  const double dt = spec.delta, sdt = std::sqrt(dt);

  const Eigen::MatrixXd corr = correlation_matrix(spec);
  Eigen::LLT<Eigen::MatrixXd> llt(corr);
  if (llt.info() != Eigen::Success) fail(ErrorKind::InvalidArgument, "correlation matrix is not positive definite");
  const Eigen::MatrixXd chol = llt.matrixL();

  std::mt19937_64 rng = child_rng(spec.seed, replication);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto exp_mean = [&](double mean) { return mean > 0.0 ? std::exponential_distribution<double>(1.0 / mean)(rng) : 0.0; };
  auto poisson = [&](double mean) { return mean > 0.0 ? std::poisson_distribution<int>(mean)(rng) : 0; };

  std::vector<double> times(n + 1);
  for (int i = 0; i <= n; ++i) times[i] = i * dt;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n + 1);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n + 1, p);

  SimulationTruth truth;
  truth.beta_grid = Eigen::MatrixXd::Zero(n + 1, p);
  for (int j = 0; j < q; ++j) {
    truth.beta_grid(0, j) = spec.betas[j].beta0;
    truth.active_set.push_back(j);
  }
  for (const FactorParams& f : spec.factors)
    if (2.0 * f.kappa_v * f.alpha_v < f.vol_of_vol * f.vol_of_vol) truth.feller_ok = false;

  Eigen::VectorXd var(p);
  for (int j = 0; j < p; ++j) var[j] = spec.factors[j].sigma0_sq;

  Eigen::VectorXd xi(p), xi_v(p), dxc(p), jump(p), vjump(p);
  Eigen::VectorXd factor_qv = Eigen::VectorXd::Zero(q);
  double y_qv = 0.0;

  for (int i = 1; i <= n; ++i) {
    // common jumps in prices and variances
    jump.setZero();
    vjump.setZero();
    const int events = poisson(spec.jump_intensity * dt);
    for (int e = 0; e < events; ++e) {
      truth.jump_times.push_back(times[i - 1] + unif(rng) * dt);
      for (int j = 0; j < p; ++j) {
        const FactorParams& f = spec.factors[j];
        jump[j] += unif(rng) < f.omega ? exp_mean(f.g_plus) : -exp_mean(f.g_minus);
        vjump[j] += exp_mean(f.g_vol);
      }
    }

    for (int j = 0; j < p; ++j) xi[j] = normal(rng);
    for (int j = 0; j < p; ++j) xi_v[j] = normal(rng);
    const Eigen::VectorXd z = chol * xi;

    for (int j = 0; j < p; ++j) {
      const FactorParams& f = spec.factors[j];
      const double v = std::max(var[j], 0.0);
      dxc[j] = f.drift * dt + std::sqrt(v) * z[j] * sdt;
      x(i, j) = x(i - 1, j) + dxc[j] + jump[j];
      var[j] += f.kappa_v * (f.alpha_v - v) * dt + f.vol_of_vol * std::sqrt(v) * sdt * xi_v[j] + vjump[j];
    }

    double dy = 0.0;
    for (int j = 0; j < q; ++j) {
      const double b = truth.beta_grid(i - 1, j);
      dy += b * (dxc[j] + jump[j]);
    }

    const double z_c = spec.idio.drift * dt + spec.idio.sigma * sdt * normal(rng);
    double z_j = 0.0;
    const int idio_events = poisson(spec.idio.intensity * dt);
    for (int e = 0; e < idio_events; ++e) {
      truth.idio_jump_times.push_back(times[i - 1] + unif(rng) * dt);
      z_j += unif(rng) < spec.idio.omega ? exp_mean(spec.idio.g_plus) : -exp_mean(spec.idio.g_minus);
    }
    y[i] = y[i - 1] + dy + z_c + z_j;
    const double dy_total = y[i] - y[i - 1];
    y_qv += dy_total * dy_total;
    for (int j = 0; j < q; ++j) factor_qv[j] += truth.beta_grid(i - 1, j) * (dxc[j] + jump[j]) * dy_total;

    for (int j = 0; j < q; ++j) {
      const BetaParams& bp = spec.betas[j];
      const double decay = std::exp(-bp.kappa * dt);
      const double sd = bp.kappa > 0.0 ? bp.vol * std::sqrt((1.0 - decay * decay) / (2.0 * bp.kappa)) : bp.vol * sdt;
      truth.beta_grid(i, j) = bp.alpha + (truth.beta_grid(i - 1, j) - bp.alpha) * decay + sd * normal(rng);
    }
  }

  truth.integrated_beta = truth.beta_grid.topRows(n).colwise().sum().transpose() * dt;
  truth.qv_shares = y_qv > 0.0 ? Eigen::VectorXd(factor_qv / y_qv) : Eigen::VectorXd::Zero(q);

  std::vector<std::string> labels;
  for (int j = 0; j < p; ++j) labels.push_back("X" + std::to_string(j + 1));
  return SimulationOutput{PricePanel(std::move(times), std::move(y), std::move(x), std::move(labels)),
                          std::move(truth)};
}

}  // namespace splinebeta
