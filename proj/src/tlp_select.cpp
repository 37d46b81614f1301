#include "splinebeta/tlp_select.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "splinebeta/error.hpp"
#include "splinebeta/kernels.hpp"

namespace splinebeta {

PenaltyConfig PenaltyConfig::from_level(double tau, double level) {
  require(tau > 0.0, "tau must be positive");
  require(level >= 0.0, "penalty level must be nonnegative");
  PenaltyConfig c;
  c.tau = tau;
  c.lambda = level * tau;
  return c;
}

double tlp(double x, double tau) {
  require(tau > 0.0, "tau must be positive");
  return std::min(std::abs(x) / tau, 1.0);
}

namespace {

// W = F F^T with F lower triangular; F_inv = F^{-1}. A dead block has W = 0.
struct BlockFactor {
  bool dead = false;
  Eigen::MatrixXd f;
  Eigen::MatrixXd f_inv;
};

BlockFactor factor_block(const Eigen::MatrixXd& w) {
  BlockFactor out;
  const Eigen::Index k = w.rows();
  const double tr = w.trace();
  if (!(tr > 0.0)) {
    out.dead = true;
    return out;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(w);
  const double floor = 1e-12 * tr / static_cast<double>(k);
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    const Eigen::VectorXd d = llt.matrixLLT().diagonal();
    ok = d.minCoeff() * d.minCoeff() >= floor;
  }
  if (!ok) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(w);
    const Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(floor);
    const Eigen::MatrixXd floored = eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
    llt.compute(0.5 * (floored + floored.transpose()));
  }
  out.f = llt.matrixL();
  out.f_inv = llt.matrixL().solve(Eigen::MatrixXd::Identity(k, k));
  return out;
}

std::vector<BlockFactor> factor_all(const DesignSystem& sys) {
  std::vector<BlockFactor> out(sys.block_count());
  for (int j = 0; j < sys.block_count(); ++j) out[j] = factor_block(sys.block_grams[j]);
  return out;
}

// Block-diagonal coordinate maps between gamma and eta = F^T gamma.
Eigen::VectorXd to_eta(const std::vector<BlockFactor>& fac, const Eigen::VectorXd& gamma, int K) {
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(gamma.size());
  for (std::size_t j = 0; j < fac.size(); ++j)
    if (!fac[j].dead) eta.segment(j * K, K) = fac[j].f.transpose() * gamma.segment(j * K, K);
  return eta;
}

Eigen::VectorXd to_gamma(const std::vector<BlockFactor>& fac, const Eigen::VectorXd& eta, int K) {
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(eta.size());
  for (std::size_t j = 0; j < fac.size(); ++j)
    if (!fac[j].dead) gamma.segment(j * K, K) = fac[j].f_inv.transpose() * eta.segment(j * K, K);
  return gamma;
}

// Map a gamma-space gradient into eta space: F^{-1} c blockwise.
Eigen::VectorXd gradient_to_eta(const std::vector<BlockFactor>& fac, const Eigen::VectorXd& c, int K) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(c.size());
  for (std::size_t j = 0; j < fac.size(); ++j)
    if (!fac[j].dead) g.segment(j * K, K) = fac[j].f_inv * c.segment(j * K, K);
  return g;
}

double block_kkt(const Eigen::Ref<const Eigen::VectorXd>& g, const Eigen::Ref<const Eigen::VectorXd>& eta,
                 double weight) {
  const double en = eta.norm();
  if (en > 0.0) return weight > 0.0 ? (g + weight * eta / en).norm() : g.norm();
  return std::max(0.0, g.norm() - weight);
}

double largest_eigenvalue(const Eigen::MatrixXd& h) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(h.rows()) / std::sqrt(static_cast<double>(h.rows()));
  double lam = 0.0;
  for (int it = 0; it < 50; ++it) {
    const Eigen::VectorXd hv = h * v;
    const double nv = hv.norm();
    if (nv == 0.0) return 0.0;
    lam = v.dot(hv);
    v = hv / nv;
  }
  // the Rayleigh quotient underestimates; bound with the final norm
  return std::max(lam, (h * v).norm());
}

void soft_threshold_block(Eigen::Ref<Eigen::VectorXd> eta, double t) {
  if (t <= 0.0) return;
  const double n = eta.norm();
  if (n <= t)
    eta.setZero();
  else
    eta *= 1.0 - t / n;
}

// Monotone FISTA for 0.5 x'Hx - b'x + sum_a lw_a ||x_a||; `offset` is added to
// the recorded objective so traces stay on the full-problem scale.
Eigen::VectorXd prox_gradient(const Eigen::MatrixXd& h, const Eigen::VectorXd& bw, Eigen::VectorXd x,
                              const Eigen::VectorXd& lw, int K, double tol, double offset,
                              const PenaltyConfig& config, GroupLassoStats& st) {
  const int m = static_cast<int>(lw.size());
  if (m == 0) return x;
  auto penalty = [&](const Eigen::VectorXd& z) {
    double s = 0.0;
    for (int a = 0; a < m; ++a) s += lw[a] * z.segment(a * K, K).norm();
    return s;
  };
  auto smooth = [&](const Eigen::VectorXd& z, const Eigen::VectorXd& hz) { return 0.5 * z.dot(hz) - bw.dot(z); };

  double lip = std::max(largest_eigenvalue(h) / 0.99, 1e-300);
  Eigen::VectorXd hx = h * x;
  double fobj = smooth(x, hx) + penalty(x);
  Eigen::VectorXd y = x, hy = hx, x_prev = x, hx_prev = hx;
  double t = 1.0;
  bool restarted = false;
  while (st.iterations < config.max_inner_iters) {
    const Eigen::VectorXd grad = hy - bw;
    const double fy = smooth(y, hy);
    Eigen::VectorXd z, hz;
    double fz = 0.0;
    while (true) {
      z = y - grad / lip;
      for (int a = 0; a < m; ++a) soft_threshold_block(z.segment(a * K, K), lw[a] / lip);
      hz = h * z;
      fz = smooth(z, hz);
      const Eigen::VectorXd dz = z - y;
      if (fz <= fy + grad.dot(dz) + 0.5 * lip * dz.squaredNorm() + 1e-15 * std::abs(fy)) break;
      lip *= 2.0;
    }
    const double zobj = fz + penalty(z);
    ++st.iterations;
    const double dec = fobj - zobj;
    x_prev = x;
    hx_prev = hx;
    const bool improved = zobj <= fobj;
    if (improved) {
      x = z;
      hx = hz;
      fobj = zobj;
    }
    st.objective_trace.push_back(offset + fobj);

    const Eigen::VectorXd gx = hx - bw;
    double kkt = 0.0;
    for (int a = 0; a < m; ++a) kkt = std::max(kkt, block_kkt(gx.segment(a * K, K), x.segment(a * K, K), lw[a]));
    const double rel_dec = std::max(dec, 0.0) / std::max(std::abs(offset + fobj), 1e-300);
    if (kkt <= 0.5 * tol && (rel_dec <= config.inner_tol || kkt <= 1e-3 * tol)) break;

    if (!improved) {
      // a plain step from the best point that fails to improve leaves only rounding noise
      if (restarted) break;
      restarted = true;
      // restart the momentum from the best point
      t = 1.0;
      y = x;
      hy = hx;
      continue;
    }
    restarted = false;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double mom = (t - 1.0) / t_next;
    y = x + mom * (x - x_prev);
    hy = hx + mom * (hx - hx_prev);
    t = t_next;
  }
  return x;
}

}  // namespace

struct SolverWorkspace::Impl {
  const DesignSystem* system = nullptr;
  std::vector<BlockFactor> fac;
  Eigen::VectorXd b_eta;
  bool has_full = false;
  Eigen::MatrixXd h_full;  // F^{-1} G F^{-T}, dead blocks zero

  void whiten(Eigen::MatrixXd& g, const std::vector<int>& ws) const {
    const int K = system->basis_count();
    const int m = static_cast<int>(ws.size());
    for (int a = 0; a < m; ++a)
      for (int c = 0; c < m; ++c) {
        if (fac[ws[a]].dead || fac[ws[c]].dead) {
          g.block(a * K, c * K, K, K).setZero();
          continue;
        }
        g.block(a * K, c * K, K, K) =
            fac[ws[a]].f_inv * g.block(a * K, c * K, K, K) * fac[ws[c]].f_inv.transpose();
      }
  }

  Eigen::MatrixXd restricted(const std::vector<int>& ws) const {
    const int K = system->basis_count();
    const int m = static_cast<int>(ws.size());
    if (has_full) {
      Eigen::MatrixXd h(m * K, m * K);
      for (int a = 0; a < m; ++a)
        for (int c = 0; c < m; ++c) h.block(a * K, c * K, K, K) = h_full.block(ws[a] * K, ws[c] * K, K, K);
      return h;
    }
    Eigen::MatrixXd g = kernels::gram(*system, nullptr, ws);
    whiten(g, ws);
    return g;
  }
};

SolverWorkspace::SolverWorkspace(const DesignSystem& system) : impl_(std::make_unique<Impl>()) {
  Impl& w = *impl_;
  w.system = &system;
  w.fac = factor_all(system);
  w.b_eta = gradient_to_eta(w.fac, kernels::apply_transpose(system, system.response), system.basis_count());
  if (system.width() <= kFullGramWidth) {
    std::vector<int> all(system.block_count());
    for (int j = 0; j < system.block_count(); ++j) all[j] = j;
    w.h_full = kernels::gram(system, nullptr, all);
    w.whiten(w.h_full, all);
    w.has_full = true;
  }
}

SolverWorkspace::~SolverWorkspace() = default;

const DesignSystem& SolverWorkspace::system() const noexcept { return *impl_->system; }

Eigen::VectorXd weighted_block_norms(const DesignSystem& system, const Eigen::VectorXd& gamma) {
  require(gamma.size() == system.width(), "coefficient length does not match design width");
  const int K = system.basis_count();
  Eigen::VectorXd out(system.block_count());
  for (int j = 0; j < system.block_count(); ++j) {
    const auto g = gamma.segment(j * K, K);
    out[j] = std::sqrt(std::max(0.0, g.dot(system.block_grams[j] * g)));
  }
  return out;
}

double penalized_objective(const DesignSystem& system, const Eigen::VectorXd& gamma, const PenaltyConfig& config) {
  const Eigen::VectorXd r = system.response - kernels::apply(system, gamma);
  const Eigen::VectorXd norms = weighted_block_norms(system, gamma);
  double pen = 0.0;
  if (config.lambda != 0.0)
    for (Eigen::Index j = 0; j < norms.size(); ++j) pen += tlp(norms[j], config.tau);
  return 0.5 * r.squaredNorm() + config.lambda * pen;
}

double group_lasso_objective(const DesignSystem& system, const Eigen::VectorXd& gamma,
                             const Eigen::VectorXd& weights) {
  const Eigen::VectorXd r = system.response - kernels::apply(system, gamma);
  return 0.5 * r.squaredNorm() + weights.dot(weighted_block_norms(system, gamma));
}

Eigen::VectorXd weighted_group_prox(const Eigen::VectorXd& v, const Eigen::MatrixXd& w, double t) {
  require(w.rows() == v.size() && w.cols() == v.size(), "prox dimensions disagree");
  require(t >= 0.0, "prox step must be nonnegative");
  const BlockFactor fac = factor_block(0.5 * (w + w.transpose()));
  if (fac.dead) return Eigen::VectorXd::Zero(v.size());
  Eigen::VectorXd eta = fac.f.transpose() * v;
  soft_threshold_block(eta, t);
  if (eta.isZero(0.0)) return Eigen::VectorXd::Zero(v.size());
  return fac.f_inv.transpose() * eta;
}

Eigen::VectorXd group_lasso_solve(const DesignSystem& system, const Eigen::VectorXd& weights,
                                  const Eigen::VectorXd& warm_start, const PenaltyConfig& config,
                                  GroupLassoStats* stats) {
  const SolverWorkspace workspace(system);
  return group_lasso_solve(workspace, weights, warm_start, config, stats);
}

Eigen::VectorXd group_lasso_solve(const SolverWorkspace& workspace, const Eigen::VectorXd& weights,
                                  const Eigen::VectorXd& warm_start, const PenaltyConfig& config,
                                  GroupLassoStats* stats) {
  const DesignSystem& system = workspace.system();
  const SolverWorkspace::Impl& wk = workspace.impl();
  const int p = system.block_count(), K = system.basis_count();
  require(weights.size() == p, "weight vector length must equal the block count");
  require((weights.array() >= 0.0).all(), "block weights must be nonnegative");
  require(warm_start.size() == system.width(), "warm start length does not match design width");

  const std::vector<BlockFactor>& fac = wk.fac;
  const double tol = config.kkt_rel_tol * std::max(system.response.norm(), 1e-300);
  const double yy = 0.5 * system.response.squaredNorm();
  const Eigen::VectorXd& b_eta = wk.b_eta;

  Eigen::VectorXd eta = to_eta(fac, warm_start, K);
  GroupLassoStats local;
  GroupLassoStats& st = stats ? *stats : local;
  st = GroupLassoStats{};

  double previous_outer = std::numeric_limits<double>::infinity();
  while (true) {
    const Eigen::VectorXd gamma = to_gamma(fac, eta, K);
    const Eigen::VectorXd resid = system.response - kernels::apply(system, gamma);
    const Eigen::VectorXd g = gradient_to_eta(fac, -kernels::apply_transpose(system, resid), K);
    double kkt = 0.0;
    std::vector<int> ws;
    for (int j = 0; j < p; ++j) {
      if (fac[j].dead) continue;
      const auto gj = g.segment(j * K, K);
      const auto ej = eta.segment(j * K, K);
      kkt = std::max(kkt, block_kkt(gj, ej, weights[j]));
      if (weights[j] == 0.0 || !ej.isZero(0.0) || gj.norm() > weights[j]) ws.push_back(j);
    }
    st.kkt_residual = kkt;
    const double obj = 0.5 * resid.squaredNorm() + [&] {
      double s = 0.0;
      for (int j = 0; j < p; ++j) s += weights[j] * eta.segment(j * K, K).norm();
      return s;
    }();
    if (st.objective_trace.empty()) st.objective_trace.push_back(obj);
    const double rel = std::isfinite(previous_outer)
                           ? std::abs(previous_outer - obj) / std::max(std::abs(obj), 1e-300)
                           : std::numeric_limits<double>::infinity();
    if (kkt <= tol && (rel <= config.inner_tol || kkt <= 1e-3 * tol || st.iterations == 0))
      return to_gamma(fac, eta, K);
    if (st.iterations >= config.max_inner_iters)
      throw NonConvergenceError("group LASSO did not converge in " + std::to_string(config.max_inner_iters) +
                                    " iterations (KKT residual " + std::to_string(kkt) + ")",
                                kkt);
    previous_outer = obj;

    // restricted problem over the working set in eta coordinates; unpenalized
    // blocks are minimized out exactly
    const int m = static_cast<int>(ws.size());
    const Eigen::MatrixXd h = wk.restricted(ws);
    std::vector<int> pen, free;
    for (int a = 0; a < m; ++a) (weights[ws[a]] > 0.0 ? pen : free).push_back(a);
    const int np = static_cast<int>(pen.size()), nf = static_cast<int>(free.size());
    auto gather = [&](const std::vector<int>& idx, const Eigen::VectorXd& src) {
      Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()) * K);
      for (std::size_t a = 0; a < idx.size(); ++a) out.segment(a * K, K) = src.segment(ws[idx[a]] * K, K);
      return out;
    };
    auto sub = [&](const std::vector<int>& r, const std::vector<int>& c) {
      Eigen::MatrixXd out(static_cast<Eigen::Index>(r.size()) * K, static_cast<Eigen::Index>(c.size()) * K);
      for (std::size_t a = 0; a < r.size(); ++a)
        for (std::size_t b = 0; b < c.size(); ++b) out.block(a * K, b * K, K, K) = h.block(r[a] * K, c[b] * K, K, K);
      return out;
    };
    Eigen::VectorXd lw(np);
    for (int a = 0; a < np; ++a) lw[a] = weights[ws[pen[a]]];
    const Eigen::VectorXd b_pen = gather(pen, b_eta), b_free = gather(free, b_eta);
    Eigen::VectorXd x_pen = gather(pen, eta), x_free;
    const Eigen::VectorXd eta_before = eta;

    if (nf == 0) {
      x_pen = prox_gradient(h, b_pen, x_pen, lw, K, tol, yy, config, st);
    } else {
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(sub(free, free));
      const Eigen::VectorXd c = ldlt.solve(b_free);
      const double offset = yy - 0.5 * b_free.dot(c);
      if (np == 0) {
        ++st.iterations;
        st.objective_trace.push_back(offset);
        x_free = c;
      } else {
        const Eigen::MatrixXd h_fp = sub(free, pen);
        const Eigen::MatrixXd mfp = ldlt.solve(h_fp);
        Eigen::MatrixXd schur = sub(pen, pen) - h_fp.transpose() * mfp;
        schur = 0.5 * (schur + schur.transpose()).eval();
        const Eigen::VectorXd b_red = b_pen - h_fp.transpose() * c;
        x_pen = prox_gradient(schur, b_red, x_pen, lw, K, tol, offset, config, st);
        x_free = c - mfp * x_pen;
      }
      if (!x_free.allFinite() || !x_pen.allFinite())
        throw SingularError("least-squares elimination produced non-finite coefficients", 0.0);
    }
    for (int a = 0; a < np; ++a) eta.segment(ws[pen[a]] * K, K) = x_pen.segment(a * K, K);
    for (int a = 0; a < nf; ++a) eta.segment(ws[free[a]] * K, K) = x_free.segment(a * K, K);
    // a pass that changes nothing has reached the rounding floor of the gradient
    if ((eta.array() == eta_before.array()).all()) return to_gamma(fac, eta, K);
  }
}

double max_block_gradient(const DesignSystem& system) {
  const std::vector<BlockFactor> fac = factor_all(system);
  const int K = system.basis_count();
  const Eigen::VectorXd g = gradient_to_eta(fac, kernels::apply_transpose(system, system.response), K);
  double best = 0.0;
  for (int j = 0; j < system.block_count(); ++j) best = std::max(best, g.segment(j * K, K).norm());
  return best;
}

SelectionResult dc_solve(const DesignSystem& system, const PenaltyConfig& config) {
  const SolverWorkspace workspace(system);
  return dc_solve(workspace, config);
}

SelectionResult dc_solve(const SolverWorkspace& workspace, const PenaltyConfig& config) {
  const DesignSystem& system = workspace.system();
  require(config.tau > 0.0, "tau must be positive");
  require(config.lambda >= 0.0, "lambda must be nonnegative");
  require(config.dc_stabilization >= 1, "dc_stabilization must be at least 1");
  const int p = system.block_count();
  const double level = config.effective_level();

  SelectionResult res;
  res.config = config;
  res.gamma_star = Eigen::VectorXd::Zero(system.width());
  std::vector<Eigen::VectorXd> history;
  for (int m = 1; m <= config.max_dc_iters + 1; ++m) {
    const Eigen::VectorXd norms = weighted_block_norms(system, res.gamma_star);
    Eigen::VectorXd w(p);
    for (int j = 0; j < p; ++j) w[j] = norms[j] <= config.tau ? level : 0.0;

    int same = 0;
    for (auto it = history.rbegin(); it != history.rend() && *it == w; ++it) ++same;
    if (!history.empty() && same + 1 >= std::max(2, config.dc_stabilization)) {
      res.converged = true;
      break;
    }
    if (m > config.max_dc_iters) break;
    history.push_back(w);

    GroupLassoStats st;
    res.gamma_star = group_lasso_solve(workspace, w, res.gamma_star, config, &st);
    res.inner_iterations.push_back(st.iterations);
    res.objective_trace.push_back(penalized_objective(system, res.gamma_star, config));
    res.dc_iterations = m;
  }
  res.weighted_block_norms = weighted_block_norms(system, res.gamma_star);
  for (int j = 0; j < p; ++j)
    if (res.weighted_block_norms[j] > 0.0) res.active_set.push_back(j);
  return res;
}

KktReport kkt_check(const DesignSystem& system, const Eigen::VectorXd& gamma, const PenaltyConfig& config,
                    double tol) {
  const int p = system.block_count(), K = system.basis_count();
  const std::vector<BlockFactor> fac = factor_all(system);
  const Eigen::VectorXd resid = system.response - kernels::apply(system, gamma);
  const Eigen::VectorXd c = -kernels::apply_transpose(system, resid);
  const Eigen::VectorXd norms = weighted_block_norms(system, gamma);
  const Eigen::VectorXd eta = to_eta(fac, gamma, K);
  const double level = config.effective_level();

  KktReport rep;
  rep.gradient_norm.resize(p);
  rep.dual_norm.resize(p);
  rep.w_weighted_norm.resize(p);
  for (int j = 0; j < p; ++j) {
    const Eigen::VectorXd cj = c.segment(j * K, K);
    rep.gradient_norm[j] = cj.norm();
    rep.w_weighted_norm[j] = std::sqrt(std::max(0.0, cj.dot(system.block_grams[j] * cj)));
    if (fac[j].dead) {
      rep.dual_norm[j] = 0.0;
      continue;
    }
    const Eigen::VectorXd gj = fac[j].f_inv * cj;
    rep.dual_norm[j] = gj.norm();
    if (norms[j] > config.tau) {
      rep.worst_active_residual = std::max(rep.worst_active_residual, rep.gradient_norm[j]);
    } else if (norms[j] > 0.0) {
      rep.worst_active_residual =
          std::max(rep.worst_active_residual, block_kkt(gj, eta.segment(j * K, K), level));
    } else {
      rep.worst_inactive_excess = std::max(rep.worst_inactive_excess, rep.dual_norm[j] - level);
    }
  }
  rep.active_ok = rep.worst_active_residual <= tol;
  rep.inactive_ok = rep.worst_inactive_excess <= tol;
  return rep;
}

}  // namespace splinebeta
