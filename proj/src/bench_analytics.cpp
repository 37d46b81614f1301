#include "splinebeta/bench_analytics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "splinebeta/design.hpp"
#include "splinebeta/error.hpp"
#include "splinebeta/tlp_select.hpp"

namespace splinebeta {

namespace {

constexpr std::uint64_t kWarmupOffset = 1ull << 40;

struct RepOutcome {
  bool ok = false;
  std::string error;
  Eigen::VectorXd scaled_error;
  std::vector<int> active;
  bool descent_ok = true;
};

bool non_increasing(const std::vector<double>& trace) {
  for (std::size_t k = 1; k < trace.size(); ++k)
    if (trace[k] > trace[k - 1] + 1e-10 * std::max(1.0, std::abs(trace[k - 1]))) return false;
  return true;
}

RepOutcome run_one(const BenchmarkOptions& opt, const EstimatorSpec& est, const SimulationOutput& sim) {
  RepOutcome out;
  try {
    const Increments inc = increments(sim.panel);
    const TruncationSpec spec = make_truncation(inc, opt.truncation);
    const TruncatedIncrements tinc = truncate(inc, spec);
    Eigen::VectorXd ib;
    if (est.kind == EstimatorKind::Akx) {
      ib = fit_local_ols_akx(tinc, est.window).integrated_beta;
    } else {
      const SplineBasis basis = SplineBasis::uniform(opt.degree, est.basis_count, inc.horizon());
      const DesignSystem sys = build_design(tinc, basis);
      if (est.kind == EstimatorKind::SplineOls) {
        ib = fit_ols(sys).integrated_beta;
      } else if (est.kind == EstimatorKind::SplineMinNorm) {
        ib = fit_min_norm(sys).integrated_beta;
      } else {
        const SelectionResult sel = dc_solve(sys, make_penalty(inc, est.alpha_tau, est.level));
        ib = make_fit(sys, sel.gamma_star).integrated_beta;
        out.active = sel.active_set;
        out.descent_ok = non_increasing(sel.objective_trace);
      }
    }
    const int q = opt.sim.q;
    const double horizon = inc.horizon();
    out.scaled_error = 100.0 * (ib.head(q) - sim.truth.integrated_beta.head(q)) / horizon;
    out.ok = true;
  } catch (const Error& e) {
    out.error = std::string(to_string(e.kind())) + ": " + e.what();
  }
  return out;
}

template <class T>
T lower_median(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

}  // namespace

const char* to_string(EstimatorKind kind) noexcept {
  switch (kind) {
    case EstimatorKind::SplineOls: return "spline_ols";
    case EstimatorKind::SplineMinNorm: return "spline_min_norm";
    case EstimatorKind::SplineTlp: return "spline_tlp";
    case EstimatorKind::Akx: return "akx";
  }
  return "unknown";
}

EstimatorKind estimator_kind_from_string(const std::string& s) {
  if (s == "spline_ols") return EstimatorKind::SplineOls;
  if (s == "spline_min_norm") return EstimatorKind::SplineMinNorm;
  if (s == "spline_tlp") return EstimatorKind::SplineTlp;
  if (s == "akx") return EstimatorKind::Akx;
  fail(ErrorKind::InvalidArgument, "unknown estimator '" + s + "'");
}

std::vector<ComponentStats> summarize_errors(const std::vector<Eigen::VectorXd>& errors) {
  require(errors.size() >= 2, "need at least 2 replications to summarize");
  const Eigen::Index q = errors.front().size();
  const double r = static_cast<double>(errors.size());
  std::vector<ComponentStats> out(q);
  for (Eigen::Index j = 0; j < q; ++j) {
    double sum = 0.0, sq = 0.0;
    for (const auto& e : errors) {
      sum += e[j];
      sq += e[j] * e[j];
    }
    const double mean = sum / r;
    double dev = 0.0;
    for (const auto& e : errors) dev += (e[j] - mean) * (e[j] - mean);
    out[j] = {mean, std::sqrt(dev / (r - 1.0)), std::sqrt(sq / r)};
  }
  return out;
}

EstimatorSpec tune_estimator(const BenchmarkOptions& opt, const EstimatorSpec& est, std::vector<CvCell>* choices) {
  EstimatorSpec tuned = est;
  if (est.kind == EstimatorKind::Akx) return tuned;
  const bool need_k = est.basis_count <= 0;
  const bool need_level = est.kind == EstimatorKind::SplineTlp && est.level < 0.0;
  if (!need_k && !need_level) return tuned;
  require(est.kind != EstimatorKind::SplineMinNorm, "the minimum-norm estimator needs an explicit basis count");

  const int paths = est.warmup_paths >= 0 ? est.warmup_paths : opt.warmup_paths;
  require(paths >= 1, "tuning needs at least one warm-up path");
  std::vector<CvCell> picked(paths);
  std::vector<std::string> errors(paths);

#pragma omp parallel for schedule(dynamic)
  for (int w = 0; w < paths; ++w) {
    try {
      const SimulationOutput sim = simulate_panel(opt.sim, kWarmupOffset + static_cast<std::uint64_t>(w));
      const Increments inc = increments(sim.panel);
      std::vector<int> ks = need_k ? opt.kn_grid : std::vector<int>{est.basis_count};
      std::vector<CvCell> grid;
      if (est.kind == EstimatorKind::SplineTlp) {
        std::vector<double> levels{est.level};
        if (need_level) {
          const SplineBasis basis = SplineBasis::uniform(opt.degree, ks.front(), inc.horizon());
          const DesignSystem sys = build_design(truncate(inc, make_truncation(inc, opt.truncation)), basis);
          const double top = standardized_max_level(sys, inc);
          levels.clear();
          for (int l = 0; l < opt.level_points; ++l)
            levels.push_back(top * std::pow(10.0, -3.0 + 3.0 * l / std::max(1, opt.level_points - 1)));
        }
        for (int k : ks)
          for (double l : levels) grid.push_back({k, l});
      } else {
        for (int k : ks) grid.push_back({k, 0.0});
      }
      CvOptions cvo;
      cvo.truncation = opt.truncation;
      cvo.alpha_tau = est.alpha_tau;
      cvo.degree = opt.degree;
      cvo.folds = opt.cv_folds;
      cvo.seed = static_cast<std::uint64_t>(w);
      cvo.penalized = est.kind == EstimatorKind::SplineTlp;
      const CvReport rep = cross_validate(inc, grid, cvo);
      picked[w] = rep.grid[opt.one_se ? rep.chosen_one_se : rep.chosen_min];
    } catch (const Error& e) {
      errors[w] = e.what();
    }
  }
  std::vector<int> ks;
  std::vector<double> levels;
  for (int w = 0; w < paths; ++w) {
    if (!errors[w].empty()) continue;
    ks.push_back(picked[w].basis_count);
    levels.push_back(picked[w].level);
    if (choices) choices->push_back(picked[w]);
  }
  if (ks.empty()) fail(ErrorKind::Singular, "warm-up cross-validation failed on every path: " + errors.front());
  if (need_k) tuned.basis_count = lower_median(ks);
  if (need_level) tuned.level = lower_median(levels);
  return tuned;
}

BenchmarkReport run_benchmark(const BenchmarkOptions& opt) {
  require(opt.replications >= 2, "a benchmark needs at least 2 replications");
  opt.sim.validate();
  const auto start = std::chrono::steady_clock::now();
  BenchmarkReport report;
  report.options = opt;

  const int ne = static_cast<int>(opt.estimators.size());
  std::vector<EstimatorSpec> tuned(ne);
  report.estimators.resize(ne);
  for (int e = 0; e < ne; ++e) {
    std::vector<CvCell> choices;
    tuned[e] = tune_estimator(opt, opt.estimators[e], &choices);
    report.estimators[e].spec = tuned[e];
    report.estimators[e].warmup_choices = choices;
  }

  const int reps = opt.replications;
  const int q = opt.sim.q;
  std::vector<std::vector<RepOutcome>> outcomes(ne, std::vector<RepOutcome>(reps));
  std::vector<Eigen::VectorXd> shares(reps);
#pragma omp parallel for schedule(dynamic)
  for (int r = 0; r < reps; ++r) {
    const SimulationOutput sim = simulate_panel(opt.sim, static_cast<std::uint64_t>(r));
    shares[r] = sim.truth.qv_shares;
    for (int e = 0; e < ne; ++e) outcomes[e][r] = run_one(opt, tuned[e], sim);
  }

  report.mean_qv_shares = Eigen::VectorXd::Zero(q);
  for (int r = 0; r < reps; ++r) report.mean_qv_shares += shares[r];
  report.mean_qv_shares /= reps;

  const int p = opt.sim.p;
  for (int e = 0; e < ne; ++e) {
    EstimatorSummary& s = report.estimators[e];
    std::vector<Eigen::VectorXd> errs;
    double rel = 0.0, irr = 0.0, correct = 0.0;
    for (int r = 0; r < reps; ++r) {
      const RepOutcome& o = outcomes[e][r];
      if (!o.ok) {
        if (s.failures++ == 0) s.first_failure = "replication " + std::to_string(r) + ": " + o.error;
        continue;
      }
      ++s.successes;
      errs.push_back(o.scaled_error);
      if (tuned[e].kind == EstimatorKind::SplineTlp) {
        int hit = 0, false_hit = 0;
        for (int j : o.active) (j < q ? hit : false_hit) += 1;
        rel += static_cast<double>(hit) / std::max(q, 1);
        if (p > q) irr += static_cast<double>(false_hit) / (p - q);
        correct += (hit == q && false_hit == 0) ? 1.0 : 0.0;
        if (!o.descent_ok) ++s.descent_violations;
        s.active_sets.push_back(o.active);
      }
    }
    if (errs.size() >= 2) s.stats = summarize_errors(errs);
    if (tuned[e].kind == EstimatorKind::SplineTlp && s.successes > 0) {
      s.relevant_rate = rel / s.successes;
      s.irrelevant_rate = p > q ? irr / s.successes : 0.0;
      s.correct_rate = correct / s.successes;
    }
  }
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

BenchmarkReport run_estimation_benchmark(const SimulationSpec& spec, const std::vector<EstimatorSpec>& estimators,
                                         int replications, std::uint64_t seed) {
  BenchmarkOptions opt;
  opt.sim = spec;
  opt.sim.seed = seed;
  opt.replications = replications;
  opt.estimators = estimators;
  return run_benchmark(opt);
}

BenchmarkReport run_selection_benchmark(const SimulationSpec& spec, const std::vector<EstimatorSpec>& tlp_configs,
                                        int replications, std::uint64_t seed) {
  for (const EstimatorSpec& e : tlp_configs)
    require(e.kind == EstimatorKind::SplineTlp, "selection benchmarks take penalized estimators only");
  return run_estimation_benchmark(spec, tlp_configs, replications, seed);
}

std::vector<GridPoint> tdr_fdr_grid(const GridOptions& opt) {
  require(!opt.kn_list.empty() && !opt.levels.empty(), "grid needs basis counts and levels");
  require(opt.replications >= 1, "grid needs at least one replication");
  const int nk = static_cast<int>(opt.kn_list.size());
  const int nl = static_cast<int>(opt.levels.size());
  const int q = opt.sim.q, p = opt.sim.p;
  // hits(cell, rep) = (relevant selected, irrelevant selected), -1 on failure
  std::vector<std::vector<std::pair<int, int>>> hits(nk * nl, std::vector<std::pair<int, int>>(opt.replications));

#pragma omp parallel for schedule(dynamic)
  for (int r = 0; r < opt.replications; ++r) {
    const SimulationOutput sim = simulate_panel(opt.sim, static_cast<std::uint64_t>(r));
    const Increments inc = increments(sim.panel);
    TruncatedIncrements tinc;
    bool ok = true;
    try {
      tinc = truncate(inc, make_truncation(inc, opt.truncation));
    } catch (const Error&) {
      ok = false;
    }
    for (int a = 0; a < nk; ++a) {
      std::optional<DesignSystem> design;
      std::optional<SolverWorkspace> sys;
      if (ok) {
        try {
          design.emplace(build_design(tinc, SplineBasis::uniform(opt.degree, opt.kn_list[a], inc.horizon())));
          sys.emplace(*design);
        } catch (const Error&) {
        }
      }
      for (int b = 0; b < nl; ++b) {
        auto& cell = hits[a * nl + b][r];
        cell = {-1, -1};
        if (!sys) continue;
        try {
          const SelectionResult sel = dc_solve(*sys, make_penalty(inc, opt.alpha_tau, opt.levels[b]));
          int h = 0, f = 0;
          for (int j : sel.active_set) (j < q ? h : f) += 1;
          cell = {h, f};
        } catch (const Error&) {
        }
      }
    }
  }

  std::vector<GridPoint> out;
  for (int a = 0; a < nk; ++a) {
    for (int b = 0; b < nl; ++b) {
      GridPoint g{opt.kn_list[a], opt.levels[b], 0.0, 0.0, 0};
      int used = 0;
      for (const auto& [h, f] : hits[a * nl + b]) {
        if (h < 0) {
          ++g.failures;
          continue;
        }
        ++used;
        g.tdr += q > 0 ? static_cast<double>(h) / q : 0.0;
        g.fdr += p > q ? static_cast<double>(f) / (p - q) : 0.0;
      }
      if (used > 0) {
        g.tdr /= used;
        g.fdr /= used;
      } else {
        g.tdr = g.fdr = std::numeric_limits<double>::quiet_NaN();
      }
      out.push_back(g);
    }
  }
  return out;
}

RiskDecomposition risk_decompose(const PricePanel& panel, const FitResult& fit, const TruncationSpec& spec,
                                 std::string window) {
  const Increments inc = increments(panel);
  require(fit.block_count == inc.covariate_count(), "fit and panel disagree on the covariate count");
  require(fit.interval_count == inc.interval_count(), "fit and panel disagree on the interval count");
  const KeepMask mask = apply_truncation(inc.response, inc.covariates, spec);
  const double horizon = inc.horizon();
  RiskDecomposition out;
  out.window = std::move(window);
  double total = 0.0, kept = 0.0, resid = 0.0;
  for (int i = 0; i < inc.interval_count(); ++i) {
    const double dy = inc.response[i];
    total += dy * dy;
    if (!mask.row_kept(i)) continue;
    kept += dy * dy;
    const double e = dy - beta_path(fit, std::min(i * inc.delta, fit.basis.horizon())).dot(inc.covariates.row(i).transpose());
    resid += e * e;
  }
  if (!(kept > 0.0)) fail(ErrorKind::InvalidArgument, "truncated realized variance is zero");
  out.total_qv = total / horizon;
  out.integrated_variance = kept / horizon;
  out.unexplained_iv = resid / horizon;
  const double r2 = 1.0 - out.unexplained_iv / out.integrated_variance;
  out.negative_r_squared = r2 < 0.0;
  out.r_squared = std::clamp(r2, 0.0, 1.0);
  return out;
}

}  // namespace splinebeta
