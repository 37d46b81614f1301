#include "splinebeta/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace splinebeta::io {

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string where(std::size_t row, std::size_t col) {
  return "row " + std::to_string(row) + ", column " + std::to_string(col);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json mat(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec(m.row(i).transpose()));
  return rows;
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

PricePanel parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::Parse, "empty CSV input");
  std::vector<std::string> header = split(trim(line));
  for (auto& h : header) h = trim(h);
  if (header.size() < 3)
    fail(ErrorKind::Parse, "header needs time, response and at least one covariate column");
  const std::size_t cols = header.size();

  std::vector<double> times;
  std::vector<std::vector<double>> values;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    line = trim(line);
    if (line.empty()) continue;
    const std::vector<std::string> cells = split(line);
    if (cells.size() != cols)
      fail(ErrorKind::Parse, "ragged row " + std::to_string(row) + ": expected " + std::to_string(cols) +
                                 " cells, found " + std::to_string(cells.size()));
    std::vector<double> parsed(cols);
    for (std::size_t c = 0; c < cols; ++c) {
      const std::string cell = trim(cells[c]);
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size())
        fail(ErrorKind::Parse, "unparseable cell '" + cell + "' at " + where(row, c + 1));
      if (std::isnan(v)) fail(ErrorKind::Parse, "NaN cell at " + where(row, c + 1));
      if (!std::isfinite(v)) fail(ErrorKind::Parse, "infinite cell at " + where(row, c + 1));
      parsed[c] = v;
    }
    if (!times.empty() && !(parsed[0] > times.back()))
      fail(ErrorKind::Parse, "non-monotone timestamp at " + where(row, 1));
    times.push_back(parsed[0]);
    values.push_back(std::move(parsed));
  }
  const std::size_t m = times.size();
  if (m < 4) fail(ErrorKind::Parse, "need at least 4 observations, found " + std::to_string(m));

  const double delta = (times.back() - times.front()) / static_cast<double>(m - 1);
  for (std::size_t i = 1; i < m; ++i) {
    const double step = times[i] - times[i - 1];
    if (std::abs(step - delta) > kCsvSpacingTolerance * delta)
      fail(ErrorKind::Parse, "non-uniform spacing at " + where(i + 1 + 1, 1) + ": step " + fmt(step) +
                                 " vs mean " + fmt(delta));
  }
  std::vector<double> grid(m);
  for (std::size_t i = 0; i < m; ++i) grid[i] = i + 1 == m ? times.back() : times.front() + static_cast<double>(i) * delta;

  Eigen::VectorXd y(m);
  Eigen::MatrixXd x(m, cols - 2);
  for (std::size_t i = 0; i < m; ++i) {
    y[i] = values[i][1];
    for (std::size_t c = 2; c < cols; ++c) x(i, c - 2) = values[i][c];
  }
  std::vector<std::string> labels(header.begin() + 2, header.end());
  return PricePanel(std::move(grid), std::move(y), std::move(x), std::move(labels), header[1]);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
  f << text;
  if (!f) fail(ErrorKind::Io, "write to '" + path + "' failed");
}

PricePanel ingest_csv(const std::string& path) { return parse_csv(read_file(path)); }

std::string format_csv(const PricePanel& panel) {
  std::string out = "time," + panel.response_label();
  for (const auto& l : panel.labels()) out += "," + l;
  out += "\n";
  for (int i = 0; i <= panel.interval_count(); ++i) {
    out += fmt(panel.times()[i]) + "," + fmt(panel.response()[i]);
    for (int j = 0; j < panel.covariate_count(); ++j) out += "," + fmt(panel.covariates()(i, j));
    out += "\n";
  }
  return out;
}

void export_csv(const PricePanel& panel, const std::string& path) { write_file(path, format_csv(panel)); }

json to_json(const SimulationSpec& s) {
  json factors = json::array();
  for (const FactorParams& f : s.factors)
    factors.push_back({{"drift", f.drift}, {"sigma0_sq", f.sigma0_sq}, {"kappa_v", f.kappa_v},
                       {"alpha_v", f.alpha_v}, {"vol_of_vol", f.vol_of_vol}, {"omega", f.omega},
                       {"g_plus", f.g_plus}, {"g_minus", f.g_minus}, {"g_vol", f.g_vol}});
  json betas = json::array();
  for (const BetaParams& b : s.betas)
    betas.push_back({{"kappa", b.kappa}, {"alpha", b.alpha}, {"vol", b.vol}, {"beta0", b.beta0}});
  return {{"p", s.p},
          {"q", s.q},
          {"delta_years", s.delta},
          {"intervals", s.intervals},
          {"jump_intensity_per_year", s.jump_intensity},
          {"seed", s.seed},
          {"correlation",
           {{"kind", s.correlation.kind == CorrelationKind::Toeplitz ? "toeplitz" : "block_latent"},
            {"r", s.correlation.r},
            {"latent_dim", s.correlation.latent_dim},
            {"seed", s.correlation.seed}}},
          {"factors", factors},
          {"betas", betas},
          {"idiosyncratic",
           {{"drift", s.idio.drift},
            {"sigma", s.idio.sigma},
            {"omega", s.idio.omega},
            {"g_plus", s.idio.g_plus},
            {"g_minus", s.idio.g_minus},
            {"intensity_per_year", s.idio.intensity}}}};
}

SimulationSpec simulation_spec_from_json(const json& j) {
  try {
    SimulationSpec s;
    if (j.value("preset", std::string()) == "default") {
      s = SimulationSpec::default_design(j.value("p", 3), j.value("seed", std::uint64_t{0}),
                                         j.value("param_seed", std::uint64_t{2024}));
    } else if (j.contains("preset")) {
      fail(ErrorKind::Parse, "unknown scenario preset '" + j["preset"].dump() + "'");
    }
    s.p = j.value("p", s.p);
    s.q = j.value("q", s.q);
    s.delta = j.value("delta_years", s.delta);
    s.intervals = j.value("intervals", s.intervals);
    s.jump_intensity = j.value("jump_intensity_per_year", s.jump_intensity);
    s.seed = j.value("seed", s.seed);
    if (j.contains("correlation")) {
      const json& c = j["correlation"];
      const std::string kind = c.value("kind", std::string("toeplitz"));
      if (kind == "toeplitz")
        s.correlation.kind = CorrelationKind::Toeplitz;
      else if (kind == "block_latent")
        s.correlation.kind = CorrelationKind::BlockLatent;
      else
        fail(ErrorKind::Parse, "unknown correlation kind '" + kind + "'");
      s.correlation.r = c.value("r", s.correlation.r);
      s.correlation.latent_dim = c.value("latent_dim", s.correlation.latent_dim);
      s.correlation.seed = c.value("seed", s.correlation.seed);
    }
    if (j.contains("factors")) {
      s.factors.clear();
      for (const json& f : j["factors"]) {
        FactorParams fp;
        fp.drift = f.at("drift");
        fp.sigma0_sq = f.at("sigma0_sq");
        fp.kappa_v = f.at("kappa_v");
        fp.alpha_v = f.at("alpha_v");
        fp.vol_of_vol = f.at("vol_of_vol");
        fp.omega = f.at("omega");
        fp.g_plus = f.at("g_plus");
        fp.g_minus = f.at("g_minus");
        fp.g_vol = f.at("g_vol");
        s.factors.push_back(fp);
      }
    }
    if (j.contains("betas")) {
      s.betas.clear();
      for (const json& b : j["betas"])
        s.betas.push_back({b.at("kappa"), b.at("alpha"), b.at("vol"), b.at("beta0")});
    }
    if (j.contains("idiosyncratic")) {
      const json& z = j["idiosyncratic"];
      s.idio.drift = z.value("drift", s.idio.drift);
      s.idio.sigma = z.value("sigma", s.idio.sigma);
      s.idio.omega = z.value("omega", s.idio.omega);
      s.idio.g_plus = z.value("g_plus", s.idio.g_plus);
      s.idio.g_minus = z.value("g_minus", s.idio.g_minus);
      s.idio.intensity = z.value("intensity_per_year", s.idio.intensity);
    }
    s.validate();
    return s;
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("invalid scenario: ") + e.what());
  }
}

json to_json(const TruncationSpec& s) {
  return {{"exponent", s.exponent},
          {"multiplier", s.multiplier},
          {"mode", to_string(s.mode)},
          {"response_threshold", nullable(s.response_threshold)},
          {"covariate_thresholds", [&] {
             json a = json::array();
             for (Eigen::Index j = 0; j < s.covariate_thresholds.size(); ++j)
               a.push_back(nullable(s.covariate_thresholds[j]));
             return a;
           }()}};
}

json to_json(const SimulationTruth& t) {
  return {{"integrated_beta", vec(t.integrated_beta)},
          {"active_set", t.active_set},
          {"jump_times", t.jump_times},
          {"idiosyncratic_jump_times", t.idio_jump_times},
          {"qv_shares", vec(t.qv_shares)},
          {"feller_ok", t.feller_ok}};
}

json to_json(const FitResult& f, const std::vector<std::string>& labels) {
  json out = {{"labels", labels},
              {"degree", f.basis.degree()},
              {"basis_count", f.basis.basis_count()},
              {"horizon_years", f.basis.horizon()},
              {"delta_years", f.delta},
              {"intervals", f.interval_count},
              {"gamma_hat", vec(f.gamma_hat)},
              {"integrated_beta", vec(f.integrated_beta)},
              {"time_averaged_beta", vec(f.integrated_beta / f.basis.horizon())},
              {"condition_diagnostic", f.condition_diagnostic},
              {"residual_sum_of_squares", f.residuals.squaredNorm()}};
  if (f.covariance) {
    out["covariance"] = mat(*f.covariance);
    out["ci95_halfwidth"] = vec(integrated_beta_halfwidth(f));
  } else {
    out["covariance"] = nullptr;
  }
  return out;
}

json to_json(const SelectionResult& s, const std::vector<std::string>& labels) {
  std::vector<std::string> active;
  for (int j : s.active_set) active.push_back(j < static_cast<int>(labels.size()) ? labels[j] : std::to_string(j));
  return {{"active_set", s.active_set},
          {"active_labels", active},
          {"gamma_star", vec(s.gamma_star)},
          {"weighted_block_norms", vec(s.weighted_block_norms)},
          {"objective_trace", s.objective_trace},
          {"inner_iterations", s.inner_iterations},
          {"dc_iterations", s.dc_iterations},
          {"converged", s.converged},
          {"penalty",
           {{"tau", s.config.tau},
            {"lambda", s.config.lambda},
            {"effective_level", s.config.effective_level()},
            {"max_dc_iters", s.config.max_dc_iters},
            {"max_inner_iters", s.config.max_inner_iters},
            {"inner_tol", s.config.inner_tol},
            {"dc_stabilization", s.config.dc_stabilization}}}};
}

json to_json(const KktReport& r) {
  return {{"active_ok", r.active_ok},
          {"inactive_ok", r.inactive_ok},
          {"worst_active_residual", r.worst_active_residual},
          {"worst_inactive_excess", r.worst_inactive_excess},
          {"gradient_norm", vec(r.gradient_norm)},
          {"dual_norm", vec(r.dual_norm)},
          {"w_weighted_norm", vec(r.w_weighted_norm)}};
}

json to_json(const CvReport& r) {
  json cells = json::array();
  for (std::size_t c = 0; c < r.grid.size(); ++c)
    cells.push_back({{"basis_count", r.grid[c].basis_count},
                     {"level", r.grid[c].level},
                     {"valid", static_cast<bool>(r.valid[c])},
                     {"mse", nullable(r.per_cell_mse[c])},
                     {"se", nullable(r.per_cell_se[c])}});
  auto cell = [&](int c) -> json {
    if (c < 0) return nullptr;
    return {{"index", c}, {"basis_count", r.grid[c].basis_count}, {"level", r.grid[c].level}};
  };
  return {{"fold_count", r.fold_count},
          {"seed", r.seed},
          {"penalized", r.penalized},
          {"alpha_tau", r.alpha_tau},
          {"cells", cells},
          {"chosen_min", cell(r.chosen_min)},
          {"chosen_one_se", cell(r.chosen_one_se)},
          {"fold_assignment", r.fold_assignment}};
}

json to_json(const EstimatorSpec& e) {
  return {{"kind", to_string(e.kind)}, {"name", e.name},       {"basis_count", e.basis_count},
          {"alpha_tau", e.alpha_tau},  {"level", e.level},     {"window", e.window}};
}

json to_json(const BenchmarkReport& r) {
  json ests = json::array();
  for (const EstimatorSummary& s : r.estimators) {
    json comps = json::array();
    for (std::size_t j = 0; j < s.stats.size(); ++j) {
      const ComponentStats& c = s.stats[j];
      if (s.dash())
        comps.push_back({{"component", j + 1}, {"bias", nullptr}, {"stdev", nullptr}, {"rmse", nullptr}});
      else
        comps.push_back({{"component", j + 1}, {"bias", c.bias}, {"stdev", c.stdev}, {"rmse", c.rmse}});
    }
    if (s.stats.empty())
      for (int j = 0; j < r.options.sim.q; ++j)
        comps.push_back({{"component", j + 1}, {"bias", nullptr}, {"stdev", nullptr}, {"rmse", nullptr}});
    json e = {{"estimator", to_json(s.spec)},
              {"successes", s.successes},
              {"failures", s.failures},
              {"dash", s.dash()},
              {"first_failure", s.first_failure},
              {"components", comps}};
    json choices = json::array();
    for (const CvCell& c : s.warmup_choices) choices.push_back({{"basis_count", c.basis_count}, {"level", c.level}});
    e["warmup_choices"] = choices;
    if (s.spec.kind == EstimatorKind::SplineTlp)
      e["selection"] = {{"relevant_rate", s.relevant_rate},
                        {"irrelevant_rate", s.irrelevant_rate},
                        {"correct_rate", s.correct_rate},
                        {"descent_violations", s.descent_violations}};
    ests.push_back(e);
  }
  const BenchmarkOptions& o = r.options;
  json options = {{"simulation", to_json(o.sim)},
                  {"replications", o.replications},
                  {"truncation",
                   {{"exponent", o.truncation.exponent},
                    {"multiplier", o.truncation.multiplier},
                    {"mode", to_string(o.truncation.mode)}}},
                  {"degree", o.degree},
                  {"warmup_paths", o.warmup_paths},
                  {"cv_folds", o.cv_folds},
                  {"one_se", o.one_se},
                  {"kn_grid", o.kn_grid},
                  {"level_points", o.level_points}};
  return {{"options", options},
          {"estimators", ests},
          {"mean_qv_shares", vec(r.mean_qv_shares)},
          {"runtime_seconds", r.runtime_seconds}};
}

json to_json(const std::vector<GridPoint>& grid) {
  json a = json::array();
  for (const GridPoint& g : grid)
    a.push_back({{"basis_count", g.basis_count},
                 {"level", g.level},
                 {"tdr", nullable(g.tdr)},
                 {"fdr", nullable(g.fdr)},
                 {"failures", g.failures}});
  return a;
}

json to_json(const RiskDecomposition& r) {
  return {{"window", r.window},
          {"total_qv", r.total_qv},
          {"integrated_variance", r.integrated_variance},
          {"unexplained_iv", r.unexplained_iv},
          {"r_squared", r.r_squared},
          {"negative_r_squared", r.negative_r_squared}};
}

json envelope(const std::string& schema, json payload, json config) {
  return {{"schema", schema}, {"schema_version", kSchemaVersion}, {"config", std::move(config)},
          {"result", std::move(payload)}};
}

json error_json(ErrorKind kind, const std::string& message) {
  return {{"schema", "error"}, {"schema_version", kSchemaVersion}, {"error", to_string(kind)}, {"message", message}};
}

std::string estimation_table_csv(const BenchmarkReport& r) {
  std::string out = "estimator,component,bias,stdev,rmse,failures\n";
  for (const EstimatorSummary& s : r.estimators) {
    const std::string name = s.spec.name.empty() ? to_string(s.spec.kind) : s.spec.name;
    for (int j = 0; j < r.options.sim.q; ++j) {
      out += name + "," + std::to_string(j + 1);
      if (s.dash() || s.stats.empty()) {
        out += ",-,-,-";
      } else {
        char buf[96];
        std::snprintf(buf, sizeof buf, ",%.3f,%.3f,%.3f", s.stats[j].bias, s.stats[j].stdev, s.stats[j].rmse);
        out += buf;
      }
      out += "," + std::to_string(s.failures) + "\n";
    }
  }
  return out;
}

std::string selection_table_csv(const BenchmarkReport& r) {
  std::string out = "estimator,alpha_tau,relevant,irrelevant,correct\n";
  for (const EstimatorSummary& s : r.estimators) {
    if (s.spec.kind != EstimatorKind::SplineTlp) continue;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s,%g,%.3f,%.3f,%.3f\n",
                  (s.spec.name.empty() ? "spline_tlp" : s.spec.name.c_str()), s.spec.alpha_tau, s.relevant_rate,
                  s.irrelevant_rate, s.correct_rate);
    out += buf;
  }
  return out;
}

std::string grid_csv(const std::vector<GridPoint>& grid) {
  std::string out = "basis_count,level,tdr,fdr,failures\n";
  for (const GridPoint& g : grid)
    out += std::to_string(g.basis_count) + "," + fmt(g.level) + "," + fmt(g.tdr) + "," + fmt(g.fdr) + "," +
           std::to_string(g.failures) + "\n";
  return out;
}

std::string beta_path_csv(const FitResult& fit, const std::vector<std::string>& labels) {
  std::string out = "time";
  for (const auto& l : labels) out += "," + l;
  out += "\n";
  for (int i = 0; i <= fit.interval_count; ++i) {
    const double t = std::min(i * fit.delta, fit.basis.horizon());
    const Eigen::VectorXd b = beta_path(fit, t);
    out += fmt(t);
    for (Eigen::Index j = 0; j < b.size(); ++j) out += "," + fmt(b[j]);
    out += "\n";
  }
  return out;
}

}  // namespace splinebeta::io
