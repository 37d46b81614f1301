#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "splinebeta/bench_analytics.hpp"
#include "splinebeta/error.hpp"
#include "splinebeta/io.hpp"
#include "splinebeta/kernels.hpp"
#include "splinebeta/spline_ols.hpp"
#include "splinebeta/tlp_select.hpp"
#include "splinebeta/tuning.hpp"

using namespace splinebeta;
using io::json;

namespace {

struct TruncationArgs {
  double pi = 0.47;
  double mult = 0.0;
  std::string mode = "auto";

  TruncationConfig config() const {
    require(mult > 0.0, "--mult must be positive");
    return {pi, mult, truncation_mode_from_string(mode)};
  }
};

void add_truncation(CLI::App* cmd, TruncationArgs& t, bool mult_required) {
  cmd->add_option("--pi", t.pi, "truncation exponent in (0, 1/2)")->capture_default_str();
  auto* m = cmd->add_option("--mult", t.mult, "truncation multiplier");
  if (mult_required)
    m->required();
  else
    m->capture_default_str();
  cmd->add_option("--mode", t.mode, "norm, componentwise or auto")
      ->check(CLI::IsMember({"norm", "componentwise", "auto"}))
      ->capture_default_str();
}

// Every parsed option of the active subcommand, for the config snapshot.
json snapshot(const CLI::App& app, const CLI::App& sub, const std::vector<std::string>& argv) {
  json opts = json::object();
  auto collect = [&](const CLI::App& a) {
    for (const CLI::Option* o : a.get_options()) {
      if (o->get_name() == "--help" || o->get_name().empty()) continue;
      const std::string key = o->get_name().substr(o->get_name().find_first_not_of('-'));
      if (o->count() == 0 && o->get_default_str().empty()) continue;
      if (o->get_type_size() == 0)
        opts[key] = o->count() > 0;
      else if (o->count() == 0)
        opts[key] = o->get_default_str();
      else if (o->results().size() == 1 && o->get_expected_max() <= 1)
        opts[key] = o->results().front();
      else
        opts[key] = o->results();
    }
  };
  collect(app);
  collect(sub);
  return {{"command", sub.get_name()}, {"argv", argv}, {"options", opts}};
}

void emit(const std::string& path, const json& j) {
  const std::string text = j.dump(2) + "\n";
  if (path.empty() || path == "-")
    std::cout << text;
  else
    io::write_file(path, text);
}

TruncationSpec build_spec(const Increments& inc, const TruncationArgs& t) {
  return make_truncation(inc, t.config());
}

// Estimation-table panels and their covariate counts.
int panel_p(char panel) {
  switch (panel) {
    case 'a': return 3;
    case 'b': return 10;
    case 'c': return 50;
    case 'd': return 100;
    case 'e': return 500;
  }
  fail(ErrorKind::InvalidArgument, std::string("unknown panel '") + panel + "'");
}

EstimatorSpec named(EstimatorKind kind, const std::string& name) {
  EstimatorSpec e;
  e.kind = kind;
  e.name = name;
  return e;
}

std::vector<EstimatorSpec> table1_estimators(int p, int min_norm_k) {
  std::vector<EstimatorSpec> out;
  if (p > 100) {
    EstimatorSpec mn = named(EstimatorKind::SplineMinNorm, "spline");
    mn.basis_count = min_norm_k;
    out.push_back(mn);
  } else {
    out.push_back(named(EstimatorKind::SplineOls, "spline"));
  }
  for (double a : {0.05, 0.01}) {
    EstimatorSpec t = named(EstimatorKind::SplineTlp, a == 0.05 ? "spline_tlp_0.05" : "spline_tlp_0.01");
    t.alpha_tau = a;
    out.push_back(t);
  }
  for (int k : {78, 91, 117}) {
    EstimatorSpec a = named(EstimatorKind::Akx, "akx_" + std::to_string(k));
    a.window = k;
    out.push_back(a);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spline estimation and selection of time-varying betas from high-frequency data"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 0;
  std::optional<std::uint64_t> seed;
  app.add_option("--threads", threads, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed, "master random seed");

  // simulate
  auto* sim = app.add_subcommand("simulate", "simulate one panel and its truth");
  std::string scenario, sim_out, truth_out;
  int sim_p = 3;
  std::uint64_t replication = 0;
  sim->add_option("--scenario", scenario, "scenario JSON")->check(CLI::ExistingFile);
  sim->add_option("--p", sim_p, "covariate count of the default design when no scenario is given")
      ->capture_default_str();
  sim->add_option("--replication", replication, "replication index")->capture_default_str();
  sim->add_option("--out", sim_out, "panel CSV")->required();
  sim->add_option("--truth", truth_out, "truth JSON (default: <out>.truth.json)");

  // shared by the estimation commands
  std::string panel_path, out_path;
  int kn = 8, degree = 3;
  double alpha_tau = 0.01, level = -1.0;
  TruncationArgs trunc;

  auto* fit = app.add_subcommand("fit", "unpenalized spline fit with sandwich covariance");
  std::string beta_csv;
  bool min_norm = false;
  fit->add_option("--panel", panel_path, "panel CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--kn", kn, "basis count")->capture_default_str();
  fit->add_option("--degree", degree, "spline degree")->capture_default_str();
  add_truncation(fit, trunc, true);
  fit->add_flag("--min-norm", min_norm, "minimum-norm solution (no covariance)");
  fit->add_option("--out", out_path, "FitResult JSON (default: stdout)");
  fit->add_option("--beta-csv", beta_csv, "beta path CSV on the sampling grid");

  auto* sel = app.add_subcommand("select", "penalized fit with variable selection");
  sel->add_option("--panel", panel_path, "panel CSV")->required()->check(CLI::ExistingFile);
  sel->add_option("--kn", kn, "basis count")->capture_default_str();
  sel->add_option("--degree", degree, "spline degree")->capture_default_str();
  sel->add_option("--alpha-tau", alpha_tau, "TLP cutoff scale")->capture_default_str();
  sel->add_option("--level", level, "standardized penalty level")->required()->check(CLI::NonNegativeNumber);
  add_truncation(sel, trunc, true);
  sel->add_option("--out", out_path, "SelectionResult JSON (default: stdout)");

  auto* cv = app.add_subcommand("cv", "cross-validate basis count and penalty level");
  std::vector<int> kn_grid{4, 6, 8, 12, 16};
  std::vector<double> levels;
  int level_points = 12, folds = 5;
  bool unpenalized = false;
  cv->add_option("--panel", panel_path, "panel CSV")->required()->check(CLI::ExistingFile);
  cv->add_option("--kn-grid", kn_grid, "basis counts")->capture_default_str()->delimiter(',');
  cv->add_option("--levels", levels, "standardized levels (default: log grid below the zero-fit level)")
      ->delimiter(',');
  cv->add_option("--level-points", level_points, "size of the default level grid")->capture_default_str();
  cv->add_option("--folds", folds, "fold count")->capture_default_str();
  cv->add_option("--degree", degree, "spline degree")->capture_default_str();
  cv->add_option("--alpha-tau", alpha_tau, "TLP cutoff scale")->capture_default_str();
  cv->add_flag("--unpenalized", unpenalized, "tune the basis count of the unpenalized fit");
  add_truncation(cv, trunc, true);
  cv->add_option("--out", out_path, "CvReport JSON (default: stdout)");

  auto* bench = app.add_subcommand("benchmark", "Monte Carlo tables");
  int table = 0, figure = 0, reps = 200, warmup = 20, bench_level_points = 12, min_norm_k = 16;
  bool pa = false, pb = false, pc = false, pd = false, pe = false;
  std::string bench_csv;
  std::vector<int> fig_kn{4, 6, 8, 12, 16};
  std::vector<double> fig_levels{0.01, 0.03, 0.07, 0.1, 0.2, 0.5};
  double fig_alpha = 0.05;
  bench->add_option("--table", table, "1: estimation, 2: selection")->check(CLI::IsMember({1, 2}));
  bench->add_option("--figure", figure, "2: TDR/FDR grid at p = 10")->check(CLI::IsMember({2}));
  bench->add_flag("--panel-a", pa, "p = 3");
  bench->add_flag("--panel-b", pb, "p = 10");
  bench->add_flag("--panel-c", pc, "p = 50");
  bench->add_flag("--panel-d", pd, "p = 100");
  bench->add_flag("--panel-e", pe, "p = 500");
  bench->add_option("--reps", reps, "replications per panel or grid cell")->capture_default_str();
  bench->add_option("--warmup", warmup, "warm-up paths for cross-validated tuning")->capture_default_str();
  bench->add_option("--level-points", bench_level_points, "warm-up level grid size")->capture_default_str();
  bench->add_option("--min-norm-kn", min_norm_k, "basis count of the unpenalized fit when pK > n")
      ->capture_default_str();
  bench->add_option("--scenario", scenario, "scenario JSON overriding the default design")
      ->check(CLI::ExistingFile);
  bench->add_option("--kn-grid", fig_kn, "figure basis counts")->capture_default_str()->delimiter(',');
  bench->add_option("--levels", fig_levels, "figure standardized levels")->capture_default_str()->delimiter(',');
  bench->add_option("--alpha-tau", fig_alpha, "figure TLP cutoff scale")->capture_default_str();
  bench->add_option("--out", out_path, "BenchmarkReport JSON (default: stdout)");
  bench->add_option("--csv", bench_csv, "table CSV");

  auto* risk = app.add_subcommand("riskdecomp", "explained share of integrated variance");
  std::string window;
  risk->add_option("--panel", panel_path, "panel CSV")->required()->check(CLI::ExistingFile);
  risk->add_option("--kn", kn, "basis count")->capture_default_str();
  risk->add_option("--degree", degree, "spline degree")->capture_default_str();
  risk->add_option("--level", level, "standardized penalty level (unpenalized fit when omitted)");
  risk->add_option("--alpha-tau", alpha_tau, "TLP cutoff scale")->capture_default_str();
  add_truncation(risk, trunc, true);
  risk->add_option("--window", window, "window label");
  risk->add_option("--out", out_path, "RiskDecomposition JSON (default: stdout)");

  const std::vector<std::string> args(argv, argv + argc);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << io::error_json(ErrorKind::InvalidArgument, e.what()).dump() << "\n";
    return 2;
  }

  try {
    kernels::set_threads(threads);
    const CLI::App* active = app.get_subcommands().front();
    const json config = snapshot(app, *active, args);
    const std::uint64_t master_seed = seed.value_or(0);

    if (sim->parsed()) {
      SimulationSpec spec = scenario.empty() ? SimulationSpec::default_design(sim_p, master_seed)
                                             : io::simulation_spec_from_json(json::parse(io::read_file(scenario)));
      if (seed) spec.seed = *seed;
      const SimulationOutput out = simulate_panel(spec, replication);
      io::export_csv(out.panel, sim_out);
      json truth = io::to_json(out.truth);
      truth["scenario"] = io::to_json(spec);
      truth["replication"] = replication;
      emit(truth_out.empty() ? sim_out + ".truth.json" : truth_out, io::envelope("truth", truth, config));
      return 0;
    }

    if (fit->parsed() || sel->parsed() || cv->parsed() || risk->parsed()) {
      const PricePanel panel = io::ingest_csv(panel_path);
      const Increments inc = increments(panel);
      const TruncationSpec spec = build_spec(inc, trunc);

      if (cv->parsed()) {
        std::vector<CvCell> grid;
        if (unpenalized) {
          for (int k : kn_grid) grid.push_back({k, 0.0});
        } else {
          require(!kn_grid.empty(), "--kn-grid is empty");
          std::vector<double> ls = levels;
          if (ls.empty()) {
            require(level_points >= 2, "--level-points must be at least 2");
            const DesignSystem sys =
                build_design(truncate(inc, spec), SplineBasis::uniform(degree, kn_grid.front(), inc.horizon()));
            const double top = standardized_max_level(sys, inc);
            for (int l = 0; l < level_points; ++l)
              ls.push_back(top * std::pow(10.0, -3.0 + 3.0 * l / (level_points - 1)));
          }
          for (int k : kn_grid)
            for (double l : ls) grid.push_back({k, l});
        }
        CvOptions opt;
        opt.truncation = trunc.config();
        opt.alpha_tau = alpha_tau;
        opt.degree = degree;
        opt.folds = folds;
        opt.seed = master_seed;
        opt.penalized = !unpenalized;
        emit(out_path, io::envelope("cv_report", io::to_json(cross_validate(inc, grid, opt)), config));
        return 0;
      }

      const DesignSystem sys = build_design(truncate(inc, spec), SplineBasis::uniform(degree, kn, inc.horizon()));

      if (fit->parsed()) {
        FitResult f = min_norm ? fit_min_norm(sys) : fit_ols(sys);
        if (!min_norm) f.covariance = sandwich_covariance(sys, f);
        json payload = io::to_json(f, panel.labels());
        payload["truncation"] = io::to_json(spec);
        if (!beta_csv.empty()) io::write_file(beta_csv, io::beta_path_csv(f, panel.labels()));
        emit(out_path, io::envelope("fit_result", payload, config));
        return 0;
      }

      if (sel->parsed()) {
        const SelectionResult s = dc_solve(sys, make_penalty(inc, alpha_tau, level));
        json payload = io::to_json(s, panel.labels());
        payload["kkt"] = io::to_json(kkt_check(sys, s.gamma_star, s.config));
        payload["truncation"] = io::to_json(spec);
        const Eigen::VectorXd ib = make_fit(sys, s.gamma_star).integrated_beta;
        payload["integrated_beta"] = std::vector<double>(ib.data(), ib.data() + ib.size());
        emit(out_path, io::envelope("selection_result", payload, config));
        return 0;
      }

      const FitResult f =
          level >= 0.0 ? make_fit(sys, dc_solve(sys, make_penalty(inc, alpha_tau, level)).gamma_star) : fit_ols(sys);
      emit(out_path, io::envelope("risk_decomposition", io::to_json(risk_decompose(panel, f, spec, window)), config));
      return 0;
    }

    // benchmark
    require((table != 0) != (figure != 0), "benchmark needs exactly one of --table or --figure");
    std::optional<SimulationSpec> base;
    if (!scenario.empty()) base = io::simulation_spec_from_json(json::parse(io::read_file(scenario)));
    auto design = [&](int p) {
      SimulationSpec s = base ? *base : SimulationSpec::default_design(p, master_seed);
      if (seed || !base) s.seed = master_seed;
      return s;
    };

    if (figure == 2) {
      GridOptions g;
      g.sim = design(base ? base->p : 10);
      g.kn_list = fig_kn;
      g.levels = fig_levels;
      g.replications = reps;
      g.alpha_tau = fig_alpha;
      const std::vector<GridPoint> pts = tdr_fdr_grid(g);
      if (!bench_csv.empty()) io::write_file(bench_csv, io::grid_csv(pts));
      emit(out_path, io::envelope("tdr_fdr_grid", {{"p", g.sim.p}, {"alpha_tau", fig_alpha}, {"grid", io::to_json(pts)}},
                                  config));
      return 0;
    }

    std::vector<char> panels;
    for (auto [flag, c] : {std::pair{pa, 'a'}, {pb, 'b'}, {pc, 'c'}, {pd, 'd'}, {pe, 'e'}})
      if (flag) panels.push_back(c);
    if (panels.empty()) panels.push_back(base ? 'x' : 'a');

    json reports = json::array();
    std::string csv;
    for (char c : panels) {
      BenchmarkOptions opt;
      opt.sim = design(c == 'x' ? base->p : panel_p(c));
      opt.replications = reps;
      opt.warmup_paths = warmup;
      opt.level_points = bench_level_points;
      if (table == 1) {
        opt.estimators = table1_estimators(opt.sim.p, min_norm_k);
      } else {
        for (double a : {0.05, 0.01}) {
          EstimatorSpec t = named(EstimatorKind::SplineTlp, a == 0.05 ? "spline_tlp_0.05" : "spline_tlp_0.01");
          t.alpha_tau = a;
          opt.estimators.push_back(t);
        }
      }
      const BenchmarkReport rep = run_benchmark(opt);
      json r = io::to_json(rep);
      r["panel"] = std::string(1, c);
      reports.push_back(r);
      const std::string body = table == 1 ? io::estimation_table_csv(rep) : io::selection_table_csv(rep);
      const std::size_t header_end = body.find('\n') + 1;
      if (csv.empty()) csv = "p," + body.substr(0, header_end);
      for (std::size_t pos = header_end; pos < body.size();) {
        const std::size_t nl = body.find('\n', pos);
        csv += std::to_string(opt.sim.p) + "," + body.substr(pos, nl - pos + 1);
        pos = nl + 1;
      }
    }
    if (!bench_csv.empty()) io::write_file(bench_csv, csv);
    emit(out_path, io::envelope("benchmark_report", {{"table", table}, {"panels", reports}}, config));
    return 0;
  } catch (const Error& e) {
    std::cerr << io::error_json(e.kind(), e.what()).dump() << "\n";
    return 1;
  } catch (const json::exception& e) {
    std::cerr << io::error_json(ErrorKind::Parse, e.what()).dump() << "\n";
    return 1;
  }
}
