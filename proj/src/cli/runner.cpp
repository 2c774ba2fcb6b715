#include "plap/cli/runner.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "plap/cli/presets.hpp"
#include "plap/elliptic.hpp"
#include "plap/errors.hpp"
#include "plap/freeboundary.hpp"
#include "plap/oracles.hpp"
#include "plap/parabolic.hpp"

namespace plap::cli {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json point_json(const Point& p, int dim) {
  return dim == 2 ? json::array({p[0], p[1]}) : json::array({p[0]});
}

// Builds a field from an expression, turning evaluation failures into
// configuration errors that name the field and the offending node.
ScalarField sample_expression(const Grid& grid, const FieldExpr& f, const std::string& field,
                              std::optional<double> t = std::nullopt) {
  return ScalarField::sample(grid, [&](const Point& x) {
    Env env;
    env.x = x[0];
    if (grid.dim() == 2) env.y = x[1];
    env.t = t;
    try {
      return eval_expression(f.ast, env);
    } catch (const EvalError& e) {
      std::ostringstream os;
      os << "$.data." << field << ": cannot evaluate '" << f.text << "' at x = " << x[0];
      if (grid.dim() == 2) os << ", y = " << x[1];
      if (t) os << ", t = " << *t;
      os << ": " << e.what();
      throw ConfigError(os.str());
    }
  });
}

SpaceTimeFunction space_time(const FieldExpr& f, const std::string& field, int dim) {
  return [f, field, dim](const Point& x, double t) {
    Env env;
    env.x = x[0];
    if (dim == 2) env.y = x[1];
    env.t = t;
    try {
      return eval_expression(f.ast, env);
    } catch (const EvalError& e) {
      throw ConfigError("$.data." + field + ": cannot evaluate '" + f.text + "': " + e.what());
    }
  };
}

struct Check {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

json checks_json(const std::vector<Check>& checks) {
  json out = json::array();
  for (const auto& c : checks) {
    out.push_back({{"name", c.name},
                   {"passed", c.passed},
                   {"value", number_or_null(c.value)},
                   {"tolerance", number_or_null(c.tolerance)},
                   {"detail", c.detail}});
  }
  return out;
}

struct Outcome {
  json payload = json::object();
  std::vector<Check> checks;
  bool nonconvergence = false;
};

// Everything an elliptic pipeline needs, built once from the config.
struct EllipticSetup {
  Grid grid;
  EllipticProblem problem;
  std::optional<ObstaclePreset> preset;
  SolverConfig solver;
};

std::optional<ObstaclePreset> preset_of(const ExperimentConfig& cfg, const Domain& domain) {
  if (!cfg.data.obstacle || cfg.data.obstacle->expression) return std::nullopt;
  try {
    return make_preset(cfg.data.obstacle->preset, cfg.data.obstacle->params, cfg.p, domain);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("$.data.obstacle: ") + e.what());
  }
}

SolverConfig solver_for(const ExperimentConfig& cfg, const Grid& grid) {
  SolverConfig sc = cfg.solver.config;
  sc.relaxation = cfg.solver.relaxation.value_or(auto_relaxation(grid));
  return sc;
}

EllipticSetup elliptic_setup(const ExperimentConfig& cfg, const Grid& grid) {
  EllipticSetup s{grid, {}, preset_of(cfg, grid.domain()), solver_for(cfg, grid)};
  std::optional<ScalarField> phi;
  if (s.preset) {
    phi = ScalarField::sample(grid, s.preset->value);
  } else if (cfg.data.obstacle) {
    phi = sample_expression(grid, *cfg.data.obstacle->expression, "obstacle");
  }
  ScalarField f = sample_expression(grid, cfg.data.rhs, "rhs");
  ScalarField g = sample_expression(grid, *cfg.data.boundary, "boundary");
  try {
    s.problem = make_elliptic_problem(grid, cfg.p, std::move(phi), std::move(f), std::move(g));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("$.data: ") + e.what());
  }
  return s;
}

json solution_json(const EllipticSolution& sol) {
  return {{"converged", sol.converged},
          {"sweeps", sol.sweeps_used},
          {"residual", sol.residual_history.empty() ? 0.0 : sol.residual_history.back()},
          {"outer_tol", sol.outer_tol},
          {"contact_nodes", sol.active.count()}};
}

void note_convergence(Outcome& out, const EllipticSolution& sol) {
  out.payload["solve"] = solution_json(sol);
  Check c{"solver_converged", sol.converged,
          sol.residual_history.empty() ? 0.0 : sol.residual_history.back(), sol.outer_tol,
          sol.converged ? "" : "complementarity residual above tolerance after max_sweeps"};
  out.checks.push_back(c);
  if (!sol.converged) out.nonconvergence = true;
}

bool identically_zero(const ScalarField& f) { return f.max_abs() == 0.0; }

std::string anchor_label(const Point& a, int dim) {
  std::string s = format_number(a[0]);
  if (dim == 2) s += "_" + format_number(a[1]);
  return s;
}

std::vector<double> radii_for(const ExperimentConfig& cfg, double h) {
  try {
    return dyadic_radii(cfg.measurement.r_max, cfg.measurement.radii_count, h, cfg.measurement.min_cells);
  } catch (const MeasurementError& e) {
    throw ConfigError(std::string("$.measurement: ") + e.what());
  }
}

void write_growth_csv(const std::filesystem::path& dir, const std::string& label,
                      const std::vector<double>& radii, const std::vector<double>& sups, bool write) {
  if (!write) return;
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    rows.push_back({radii[k], sups[k], std::log(radii[k]), sups[k] > 0.0 ? std::log(sups[k]) : kNaN});
  }
  write_csv(dir / ("growth_" + label + ".csv"), {"r", "S", "log_r", "log_S"}, rows);
}

// ---------------------------------------------------------------- pipelines

Outcome run_solve(const ExperimentConfig& cfg, const std::filesystem::path& dir, bool write) {
  Outcome out;
  const EllipticSetup s = elliptic_setup(cfg, make_grid(*cfg.grid));
  const EllipticSolution sol = solve_obstacle(s.problem, s.solver);
  note_convergence(out, sol);
  const KktReport kkt = verify_kkt(sol, s.problem, sol.outer_tol);
  out.payload["kkt"] = {{"feasibility", kkt.feasibility},
                        {"supersolution", kkt.supersolution},
                        {"stationarity", kkt.stationarity},
                        {"tol", kkt.tol}};
  out.checks.push_back({"kkt", kkt.passed,
                        std::max({kkt.feasibility, kkt.supersolution, kkt.stationarity}), kkt.tol, ""});
  if (cfg.data.exact) {
    const ScalarField exact = sample_expression(s.grid, *cfg.data.exact, "exact");
    double err = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) err = std::max(err, std::abs(sol.u[i] - exact[i]));
    out.payload["max_error"] = err;
  }
  if (write) {
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < sol.residual_history.size(); ++k) {
      rows.push_back({static_cast<double>(k), sol.residual_history[k]});
    }
    write_csv(dir / "residuals.csv", {"check", "residual"}, rows);
    if (cfg.output.solution_bin) write_solution_bin(dir / "solution.bin", sol.u);
  }
  return out;
}

Outcome run_elliptic_growth(const ExperimentConfig& cfg, const std::filesystem::path& dir, bool write) {
  Outcome out;
  const EllipticSetup s = elliptic_setup(cfg, make_grid(*cfg.grid));
  const Grid& grid = s.grid;
  const std::vector<double> radii = radii_for(cfg, grid.h());

  const bool homogeneous = identically_zero(s.problem.rhs);
  double expected = 0.0;
  if (cfg.measurement.expected_exponent) {
    expected = *cfg.measurement.expected_exponent;
  } else {
    std::optional<double> beta = s.preset ? std::optional<double>(s.preset->beta) : cfg.data.beta;
    if (!beta) throw ConfigError("$.data.beta: required for growth runs with expression obstacles");
    expected = expected_growth_exponent(cfg.p, *beta, homogeneous);
    out.payload["beta"] = *beta;
  }
  const std::string grad_mode = cfg.measurement.gradient.value_or(s.preset ? "analytic" : "numeric");
  if (grad_mode == "analytic" && !s.preset) {
    throw ConfigError("$.measurement.gradient: analytic gradients need an obstacle preset");
  }
  const GradientSource source = grad_mode == "analytic" ? GradientSource::analytic_obstacle : GradientSource::numeric;

  const EllipticSolution sol = solve_obstacle(s.problem, s.solver);
  note_convergence(out, sol);
  if (!sol.converged) return out;

  const NodeSet gamma = free_boundary(sol, s.problem);
  out.payload["free_boundary_nodes"] = gamma.count();
  GrowthFit fit;
  try {
    fit = measure_growth(sol.u, gamma, cfg.measurement.anchor, radii, source,
                         s.preset ? s.preset->gradient : GradientFunction{}, expected);
  } catch (const MeasurementError& e) {
    out.checks.push_back({"growth_measurement", false, kNaN, kNaN, e.what()});
    return out;
  }
  fit.obstacle_norm = s.problem.obstacle ? s.problem.obstacle->max_abs() : 0.0;
  fit.rhs_bound = s.problem.rhs.max_abs();
  out.payload["growth"] = {{"center", point_json(fit.center, grid.dim())},
                           {"radii", fit.radii},
                           {"sups", fit.sups},
                           {"fitted_slope", fit.fitted_slope},
                           {"fitted_intercept", fit.fitted_intercept},
                           {"expected_exponent", fit.expected_exponent},
                           {"alpha", fit.alpha_used},
                           {"rss", fit.rss},
                           {"dropped", fit.dropped},
                           {"obstacle_norm", fit.obstacle_norm},
                           {"rhs_bound", fit.rhs_bound},
                           {"homogeneous", homogeneous},
                           {"gradient", grad_mode}};
  out.checks.push_back({"growth_slope", std::abs(fit.fitted_slope - expected) <= cfg.measurement.slope_tolerance,
                        fit.fitted_slope - expected, cfg.measurement.slope_tolerance,
                        "fitted minus expected exponent"});
  write_growth_csv(dir, anchor_label(cfg.measurement.anchor, grid.dim()), fit.radii, fit.sups, write);

  if (cfg.measurement.blowup_factor > 0.0) {
    std::vector<double> maxima;
    std::optional<ScalarField> rhs;
    if (!homogeneous) rhs = s.problem.rhs;
    try {
      for (double r : radii) {
        maxima.push_back(blowup_rescale(sol.u, fit.center, r, fit.alpha_used, rhs, cfg.p, s.problem.obstacle)
                             .half_ball_max);
      }
      const double hi = *std::max_element(maxima.begin(), maxima.end());
      const double lo = *std::min_element(maxima.begin(), maxima.end());
      const double factor = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
      out.payload["blowup"] = {{"radii", radii}, {"half_ball_max", maxima}, {"variation_factor", number_or_null(factor)}};
      out.checks.push_back({"blowup_bounded", factor <= cfg.measurement.blowup_factor, factor,
                            cfg.measurement.blowup_factor, "max over min of half-ball maxima"});
    } catch (const MeasurementError& e) {
      out.payload["blowup"] = {{"error", e.what()}};
    }
  }
  if (write && cfg.output.solution_bin) write_solution_bin(dir / "solution.bin", sol.u);
  return out;
}

struct ParabolicSetup {
  Grid grid;
  ParabolicProblem problem;
  TimeGrid timegrid;
  SolverConfig solver;
};

ParabolicSetup parabolic_setup(const ExperimentConfig& cfg) {
  const Grid grid = make_grid(*cfg.grid);
  const int dim = grid.dim();
  std::optional<SpaceTimeFunction> phi;
  if (cfg.data.obstacle) phi = space_time(*cfg.data.obstacle->expression, "obstacle", dim);
  const SpaceTimeFunction g = space_time(*cfg.data.boundary, "boundary", dim);
  ScalarField initial = cfg.data.initial ? sample_expression(grid, *cfg.data.initial, "initial")
                                         : sample_expression(grid, *cfg.data.boundary, "boundary", 0.0);
  ParabolicSetup s{grid,
                   make_parabolic_problem(grid, cfg.p, phi, g, std::move(initial), cfg.time->horizon),
                   make_time_grid(cfg.time->horizon, cfg.time->dt > 0.0 ? cfg.time->dt : grid.h()), solver_for(cfg, grid)};
  try {
    validate(s.problem, s.timegrid);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("$.data: ") + e.what());
  }
  return s;
}

void note_parabolic(Outcome& out, const ParabolicSolution& sol, const TimeGrid& tg) {
  int total = 0;
  double worst = 0.0;
  for (std::size_t k = 0; k < sol.sweeps.size(); ++k) {
    total += sol.sweeps[k];
    worst = std::max(worst, sol.residuals[k]);
  }
  out.payload["solve"] = {{"completed", sol.completed},
                          {"steps", tg.steps},
                          {"dt", tg.dt},
                          {"total_sweeps", total},
                          {"max_residual", worst},
                          {"failure_index", sol.failure_index}};
  out.checks.push_back({"solver_converged", sol.completed, worst, kNaN,
                        sol.completed ? "" : "a time step did not converge"});
  if (!sol.completed) out.nonconvergence = true;
}

void write_steps_csv(const std::filesystem::path& dir, const ParabolicSolution& sol) {
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < sol.times.size(); ++k) {
    rows.push_back({static_cast<double>(k), sol.times[k], sol.residuals[k], static_cast<double>(sol.sweeps[k])});
  }
  write_csv(dir / "steps.csv", {"k", "t", "residual", "sweeps"}, rows);
}

Outcome run_parabolic(const ExperimentConfig& cfg, const std::filesystem::path& dir, bool write) {
  Outcome out;
  const ParabolicSetup s = parabolic_setup(cfg);
  const ParabolicSolution sol = solve_parabolic(s.problem, s.timegrid, s.solver);
  note_parabolic(out, sol, s.timegrid);
  if (write) write_steps_csv(dir, sol);
  if (!sol.completed) return out;
  const LipschitzReport rep = time_lipschitz_constant(sol, s.problem, s.timegrid, cfg.measurement.lipschitz_tol);
  out.payload["lipschitz"] = {{"measured", rep.measured},
                              {"bound", rep.bound},
                              {"margin", rep.margin},
                              {"obstacle_rate", rep.obstacle_rate},
                              {"boundary_rate", rep.boundary_rate},
                              {"initial_p_laplacian", rep.initial_p_laplacian}};
  out.checks.push_back({"time_lipschitz", rep.margin >= 0.0, rep.measured,
                        rep.bound * (1.0 + cfg.measurement.lipschitz_tol), "measured against N (1 + tol)"});
  if (write && cfg.output.solution_bin) write_solution_bin(dir / "solution.bin", sol.slices.back());
  return out;
}

Outcome run_parabolic_growth(const ExperimentConfig& cfg, const std::filesystem::path& dir, bool write) {
  Outcome out;
  const ParabolicSetup s = parabolic_setup(cfg);
  const Grid& grid = s.grid;
  const std::vector<double> radii = radii_for(cfg, grid.h());
  const double q = cfg.p / (cfg.p - 1.0);
  const double expected = cfg.measurement.expected_exponent.value_or(q);
  const ParabolicSolution sol = solve_parabolic(s.problem, s.timegrid, s.solver);
  note_parabolic(out, sol, s.timegrid);
  if (write) write_steps_csv(dir, sol);
  if (!sol.completed) return out;

  const double target = cfg.measurement.slice_time.value_or(cfg.time->horizon);
  std::size_t slice = 0;
  for (std::size_t k = 0; k < sol.times.size(); ++k)
    if (std::abs(sol.times[k] - target) < std::abs(sol.times[slice] - target)) slice = k;
  const double ts = sol.times[slice];
  std::optional<ScalarField> phi;
  if (s.problem.obstacle) {
    phi = ScalarField::sample(grid, [&](const Point& x) { return (*s.problem.obstacle)(x, ts); });
  }
  const NodeSet gamma = free_boundary(sol.active_sets[slice], sol.slices[slice], phi, s.problem.boundary_mask);
  out.payload["slice_time"] = ts;
  out.payload["free_boundary_nodes"] = gamma.count();
  try {
    const std::size_t center = snap_to_free_boundary(gamma, cfg.measurement.anchor);
    const Vec grad = reference_gradient(sol.slices[slice], center, GradientSource::numeric, {});
    std::vector<double> sups;
    for (double r : radii) sups.push_back(parabolic_growth_sup(sol, slice, center, r, cfg.p, grad));
    const ExponentFit fit = fit_exponent(radii, sups);
    out.payload["growth"] = {{"center", point_json(grid.coords(center), grid.dim())},
                             {"radii", radii},
                             {"sups", sups},
                             {"fitted_slope", fit.slope},
                             {"fitted_intercept", fit.intercept},
                             {"expected_exponent", expected},
                             {"rss", fit.rss},
                             {"dropped", fit.dropped}};
    out.checks.push_back({"growth_slope", std::abs(fit.slope - expected) <= cfg.measurement.slope_tolerance,
                          fit.slope - expected, cfg.measurement.slope_tolerance, "fitted minus expected exponent"});
    write_growth_csv(dir, anchor_label(cfg.measurement.anchor, grid.dim()), radii, sups, write);
  } catch (const MeasurementError& e) {
    out.checks.push_back({"growth_measurement", false, kNaN, kNaN, e.what()});
  }
  return out;
}

Outcome run_nondeg(const ExperimentConfig& cfg, const std::filesystem::path& dir, bool write) {
  Outcome out;
  const EllipticSetup s = elliptic_setup(cfg, make_grid(*cfg.grid));
  NondegHypotheses hyp;
  hyp.p = cfg.p;
  hyp.rhs_max_abs = s.problem.rhs.max_abs();
  hyp.obstacle_strict_supersolution = s.preset && s.preset->strict_supersolution;
  // Hypotheses are checked before the solve so a bad config fails fast.
  if (!(hyp.p > 2.0)) throw PreconditionError("non-degeneracy requires p > 2");
  if (hyp.rhs_max_abs != 0.0) throw PreconditionError("non-degeneracy requires f = 0");
  if (!hyp.obstacle_strict_supersolution) {
    throw PreconditionError("non-degeneracy requires an obstacle preset certified Delta_p phi < 0");
  }
  const std::vector<double> radii = radii_for(cfg, s.grid.h());
  const EllipticSolution sol = solve_obstacle(s.problem, s.solver);
  note_convergence(out, sol);
  if (!sol.converged) return out;
  const NodeSet gamma = free_boundary(sol, s.problem);
  try {
    const Point x0 = s.grid.coords(snap_to_free_boundary(gamma, cfg.measurement.anchor));
    const double hw = cfg.measurement.shell_half_width > 0.0 ? cfg.measurement.shell_half_width : s.grid.h();
    const NondegReport rep = nondegeneracy_profile(sol, s.problem, x0, radii, hw, hyp);
    std::vector<bool> degenerate(rep.degenerate.begin(), rep.degenerate.end());
    out.payload["nondeg"] = {{"center", point_json(x0, s.grid.dim())},
                             {"radii", rep.radii},
                             {"shell_sup", rep.shell_sup},
                             {"ball_sup", rep.ball_sup},
                             {"degenerate", degenerate},
                             {"min_ratio", rep.min_ratio},
                             {"max_ratio", rep.max_ratio},
                             {"epsilon_measured", rep.epsilon_measured},
                             {"shell_half_width", hw}};
    const bool ok = rep.min_ratio > 0.0 && rep.min_ratio >= cfg.measurement.ratio_floor * rep.max_ratio;
    out.checks.push_back({"nondegeneracy", ok, rep.max_ratio > 0.0 ? rep.min_ratio / rep.max_ratio : 0.0,
                          cfg.measurement.ratio_floor, "min over max of sup(u - phi) / r^2"});
    if (write) {
      std::vector<std::vector<double>> rows;
      for (std::size_t k = 0; k < rep.radii.size(); ++k) {
        const double r = rep.radii[k];
        rows.push_back({r, rep.shell_sup[k], rep.ball_sup[k], rep.shell_sup[k] / (r * r),
                        rep.degenerate[k] ? 1.0 : 0.0});
      }
      write_csv(dir / "nondeg.csv", {"r", "shell_sup", "ball_sup", "ratio", "degenerate"}, rows);
    }
  } catch (const MeasurementError& e) {
    out.checks.push_back({"nondeg_measurement", false, kNaN, kNaN, e.what()});
  }
  return out;
}

Outcome run_porosity(const ExperimentConfig& cfg, const std::filesystem::path& dir, bool write) {
  Outcome out;
  const EllipticSetup s = elliptic_setup(cfg, make_grid(*cfg.grid));
  const double h = s.grid.h();
  std::vector<double> radii;
  for (double c : cfg.measurement.porosity_cells) radii.push_back(c * h);
  const double r_max = *std::max_element(radii.begin(), radii.end());
  const EllipticSolution sol = solve_obstacle(s.problem, s.solver);
  note_convergence(out, sol);
  if (!sol.converged) return out;
  const NodeSet gamma = free_boundary(sol, s.problem);
  const auto points = sample_free_boundary(gamma, static_cast<std::size_t>(cfg.measurement.points), r_max);
  out.checks.push_back({"porosity_points", points.size() >= static_cast<std::size_t>(cfg.measurement.points),
                        static_cast<double>(points.size()), static_cast<double>(cfg.measurement.points),
                        "free-boundary points whose balls fit in the domain"});
  try {
    const PorosityReport rep = porosity_report(gamma, points, radii);
    json pts = json::array();
    for (const auto& p : rep.points) pts.push_back(point_json(p, s.grid.dim()));
    out.payload["porosity"] = {{"points", pts},
                               {"radii", rep.radii},
                               {"densities", rep.densities},
                               {"max_density", rep.max_density},
                               {"delta_measured", rep.delta_measured}};
    out.checks.push_back({"porosity_density", !rep.points.empty() && rep.max_density <= cfg.measurement.density_max,
                          rep.max_density, cfg.measurement.density_max, "largest cell density of Gamma in B_r"});
    if (write) {
      std::vector<std::vector<double>> rows;
      for (std::size_t i = 0; i < rep.points.size(); ++i) {
        for (std::size_t k = 0; k < rep.radii.size(); ++k) {
          rows.push_back({rep.points[i][0], rep.points[i][1], rep.radii[k], rep.densities[i][k]});
        }
      }
      write_csv(dir / "porosity.csv", {"x", "y", "r", "density"}, rows);
    }
  } catch (const MeasurementError& e) {
    out.checks.push_back({"porosity_measurement", false, kNaN, kNaN, e.what()});
  }
  return out;
}

json audit_json(const AuditRecord& a) {
  return {{"name", a.name},
          {"constant_name", a.constant_name},
          {"p", a.p},
          {"dim", a.dim},
          {"ok", a.ok},
          {"audited_constant", a.ok ? json(a.audited) : json(nullptr)},
          {"hand_derived_constant", a.analytic},
          {"printed_constant", a.printed ? json(*a.printed) : json(nullptr)},
          {"relative_discrepancy", a.relative_discrepancy ? number_or_null(*a.relative_discrepancy) : json(nullptr)},
          {"audit_vs_hand_derived", a.ok ? json(a.analytic_agreement) : json(nullptr)},
          {"bisection_steps", a.bisection_steps},
          {"message", a.message}};
}

AuditRecord audit_for(const OracleSpec& o, double p, int dim) {
  try {
    return constant_audit(o.name, p, dim, o.params, o.audit_nodes);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("$.oracle: ") + e.what());
  }
}

Outcome run_oracle(const ExperimentConfig& cfg, const std::filesystem::path& dir, bool write) {
  Outcome out;
  const OracleSpec& o = *cfg.oracle;
  const int dim = o.dim.value_or(1);
  ExactSolution ex;
  try {
    ex = catalog(o.name, cfg.p, dim, o.params);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("$.oracle: ") + e.what());
  }
  double constant = ex.constant;
  std::string source = "audited";
  if (const auto* v = std::get_if<double>(&o.constant)) {
    constant = *v;
    source = "given";
  } else if (std::get<std::string>(o.constant) == "printed") {
    if (!ex.printed_constant) throw ConfigError("$.oracle.constant: '" + o.name + "' has no printed constant");
    constant = *ex.printed_constant;
    source = "printed";
  }
  constant *= 1.0 + o.perturbation;
  const ExactSolution used = with_constant(ex, constant);
  ResidualReport rep;
  try {
    rep = residual_scan(used, o.coarse_nodes, o.levels, o.margin);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("$.oracle: ") + e.what());
  }
  json levels = json::array();
  std::vector<std::vector<double>> rows;
  for (const auto& l : rep.levels) {
    levels.push_back({{"h", l.h}, {"residual", l.residual}, {"rate", number_or_null(l.rate)}, {"samples", l.samples}});
    rows.push_back({l.h, l.residual, l.rate, static_cast<double>(l.samples)});
  }
  out.payload["oracle"] = {{"name", o.name},
                           {"dim", dim},
                           {"constant_name", ex.constant_name},
                           {"constant", constant},
                           {"constant_source", source},
                           {"perturbation", o.perturbation},
                           {"time", rep.time},
                           {"levels", levels},
                           {"min_rate", number_or_null(rep.min_rate)},
                           {"finest_rate", number_or_null(rep.finest_rate)}};
  if (ex.name == "barenblatt") out.payload["oracle"]["lambda"] = ex.params.at("lambda");
  out.checks.push_back({"residual_rate", rep.min_rate >= o.min_rate, rep.min_rate, o.min_rate,
                        "smallest observed refinement rate of the residual"});
  out.payload["audit"] = audit_json(audit_for(o, cfg.p, dim));
  if (write) write_csv(dir / "residual.csv", {"h", "residual", "rate", "samples"}, rows);
  return out;
}

Outcome run_audit(const ExperimentConfig& cfg) {
  Outcome out;
  const OracleSpec& o = *cfg.oracle;
  const AuditRecord a = audit_for(o, cfg.p, o.dim.value_or(1));
  out.payload["audit"] = audit_json(a);
  out.checks.push_back({"audit_root_found", a.ok, a.ok ? 1.0 : 0.0, 1.0, a.message});
  if (a.ok) {
    out.checks.push_back({"audit_matches_hand_derivation", a.analytic_agreement <= o.audit_tol,
                          a.analytic_agreement, o.audit_tol, "relative gap between audited and hand-derived"});
  }
  return out;
}

Outcome run_convergence(const ExperimentConfig& cfg, const std::filesystem::path& dir, bool write) {
  Outcome out;
  const auto rows = convergence_study(cfg, cfg.convergence.levels);
  json table = json::array();
  std::vector<std::vector<double>> csv;
  bool all_converged = true;
  bool any_meaningful = false;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    table.push_back({{"nodes", r.nodes},
                     {"h", r.h},
                     {"error", r.error},
                     {"rate", number_or_null(r.rate)},
                     {"converged", r.converged},
                     {"meaningful", r.meaningful}});
    csv.push_back({static_cast<double>(k), static_cast<double>(r.nodes), r.h, r.error, r.rate,
                   r.converged ? 1.0 : 0.0, r.meaningful ? 1.0 : 0.0});
    all_converged = all_converged && r.converged;
    any_meaningful = any_meaningful || r.meaningful;
  }
  out.payload["convergence"] = {{"reference", cfg.convergence.reference}, {"rows", table}};
  if (!all_converged) out.nonconvergence = true;
  out.checks.push_back({"all_levels_converged", all_converged, 0.0, 0.0, ""});
  const auto& last = rows.back();
  if (any_meaningful && last.meaningful) {
    out.checks.push_back({"finest_rate", last.rate >= cfg.convergence.min_rate, last.rate, cfg.convergence.min_rate,
                          "observed rate between the two finest levels"});
  } else {
    out.checks.push_back({"error_at_tolerance_level", !last.meaningful, last.error, kNaN,
                          "errors at solver-tolerance level; rates not meaningful"});
  }
  if (write) {
    write_csv(dir / "convergence.csv", {"level", "nodes", "h", "error", "rate", "converged", "meaningful"}, csv);
  }
  return out;
}

}  // namespace

double auto_relaxation(const Grid& grid) {
  int n = grid.counts()[0];
  if (grid.dim() == 2) n = std::max(n, grid.counts()[1]);
  return 2.0 / (1.0 + std::sin(std::numbers::pi / (n - 1)));
}

std::vector<ConvergenceRow> convergence_study(const ExperimentConfig& cfg, int levels) {
  if (levels < 3) throw ConfigError("a convergence study needs at least 3 levels");
  std::vector<ConvergenceRow> rows;
  GridSpec spec = *cfg.grid;
  for (int l = 0; l < levels; ++l) {
    const Grid grid = make_grid(spec);
    const EllipticSetup s = elliptic_setup(cfg, grid);
    const EllipticSolution sol = solve_obstacle(s.problem, s.solver);
    ScalarField reference;
    if (cfg.convergence.reference == "psor") {
      reference = projected_sor(grid, s.problem.obstacle, s.problem.rhs, s.problem.boundary_values,
                                auto_relaxation(grid));
    } else {
      reference = sample_expression(grid, *cfg.data.exact, "exact");
    }
    ConvergenceRow row;
    row.nodes = spec.nodes[0];
    row.h = grid.h();
    row.converged = sol.converged;
    for (std::size_t i = 0; i < grid.size(); ++i) row.error = std::max(row.error, std::abs(sol.u[i] - reference[i]));
    // Below this the error reflects the solver tolerance, not the scheme.
    const double floor = 1e-8 * (1.0 + reference.max_abs());
    row.meaningful = row.error > floor;
    row.rate = kNaN;
    if (!rows.empty() && row.meaningful && rows.back().meaningful) {
      row.rate = std::log(rows.back().error / row.error) / std::log(rows.back().h / row.h);
    }
    rows.push_back(row);
    for (int k = 0; k < spec.dim; ++k) spec.nodes[k] = 2 * (spec.nodes[k] - 1) + 1;
  }
  return rows;
}

ScalarField projected_sor(const Grid& grid, const std::optional<ScalarField>& obstacle, const ScalarField& rhs,
                          const ScalarField& boundary, double omega, double tol, int max_sweeps) {
  const int nx = grid.counts()[0];
  const int ny = grid.dim() == 2 ? grid.counts()[1] : 1;
  const double hx = grid.spacing()[0];
  const double hy = grid.dim() == 2 ? grid.spacing()[1] : 1.0;
  // Stiffness couplings and lumped weight of an interior node.
  const double cx = grid.dim() == 2 ? hy / hx : 1.0 / hx;
  const double cy = grid.dim() == 2 ? hx / hy : 0.0;
  const double weight = grid.dim() == 2 ? hx * hy : hx;
  const double diag = 2.0 * cx + 2.0 * cy;
  std::vector<double> u(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    u[i] = grid.is_boundary(i) ? boundary[i] : (obstacle ? std::max((*obstacle)[i], boundary[i]) : boundary[i]);
  }
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double change = 0.0;
    for (int j = (ny > 1 ? 1 : 0); j < (ny > 1 ? ny - 1 : 1); ++j) {
      for (int i = 1; i < nx - 1; ++i) {
        const std::size_t k = static_cast<std::size_t>(j) * nx + i;
        double off = cx * (u[k - 1] + u[k + 1]);
        if (ny > 1) off += cy * (u[k - nx] + u[k + nx]);
        // Stationarity: diag u_k - off + weight f_k = 0.
        const double gs = (off - weight * rhs[k]) / diag;
        double v = u[k] + omega * (gs - u[k]);
        if (obstacle) v = std::max(v, (*obstacle)[k]);
        change = std::max(change, std::abs(v - u[k]));
        u[k] = v;
      }
    }
    if (change < tol) break;
  }
  return ScalarField(grid, std::move(u));
}

void write_solution_bin(const std::filesystem::path& path, const ScalarField& field) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  auto put32 = [&](std::uint32_t v) {
    unsigned char b[4];
    for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  out.write("PLAP1", 5);
  const Grid& g = field.grid();
  put32(static_cast<std::uint32_t>(g.dim()));
  for (int k = 0; k < g.dim(); ++k) put32(static_cast<std::uint32_t>(g.counts()[k]));
  for (double v : field.values()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
    out.write(reinterpret_cast<const char*>(b), 8);
  }
}

ScalarField read_solution_bin(const std::filesystem::path& path, const Domain& domain) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path.string() + "'");
  char magic[5];
  in.read(magic, 5);
  if (!in || std::memcmp(magic, "PLAP1", 5) != 0) throw Error("not a PLAP1 file");
  auto get32 = [&]() {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b[k]) << (8 * k);
    return v;
  };
  const int dim = static_cast<int>(get32());
  if (dim != domain.dim) throw Error("dimension mismatch in '" + path.string() + "'");
  std::array<int, 2> counts{1, 1};
  for (int k = 0; k < dim; ++k) counts[k] = static_cast<int>(get32());
  const Grid grid = build_grid(domain, counts);
  std::vector<double> values(grid.size());
  for (double& v : values) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
    v = std::bit_cast<double>(bits);
  }
  if (!in) throw Error("truncated '" + path.string() + "'");
  return ScalarField(grid, std::move(values));
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      out << (k ? "," : "") << (std::isnan(row[k]) ? std::string("nan") : format_number(row[k]));
    }
    out << '\n';
  }
}

json error_report(const std::string& message, int exit_code) {
  return {{"artifact", "plap"},
          {"version", kVersion},
          {"status", exit_code == kInvalidConfig ? "invalid_config" : "error"},
          {"exit_code", exit_code},
          {"error", message},
          {"passed", false}};
}

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  RunResult result;
  result.out_dir = options.out_dir.value_or(std::filesystem::path(cfg.output.dir));
  const bool write = options.write_files;
  if (write) std::filesystem::create_directories(result.out_dir);
  const auto& dir = result.out_dir;

  Outcome out;
  switch (cfg.kind) {
    case Kind::elliptic: out = run_solve(cfg, dir, write); break;
    case Kind::parabolic: out = run_parabolic(cfg, dir, write); break;
    case Kind::growth:
      out = cfg.time ? run_parabolic_growth(cfg, dir, write) : run_elliptic_growth(cfg, dir, write);
      break;
    case Kind::nondeg: out = run_nondeg(cfg, dir, write); break;
    case Kind::porosity: out = run_porosity(cfg, dir, write); break;
    case Kind::oracle: out = run_oracle(cfg, dir, write); break;
    case Kind::audit: out = run_audit(cfg); break;
    case Kind::convergence: out = run_convergence(cfg, dir, write); break;
  }

  bool passed = true;
  for (const auto& c : out.checks) passed = passed && c.passed;
  result.exit_code = out.nonconvergence ? kNonConvergence : (passed ? kPass : kCheckFailed);
  const char* status = out.nonconvergence ? "nonconvergence" : (passed ? "pass" : "fail");
  result.report = {{"artifact", "plap"},
                   {"version", kVersion},
                   {"kind", to_string(cfg.kind)},
                   {"config_digest", config_digest(cfg.canonical)},
                   {"config", cfg.canonical},
                   {"run", {{"threads", options.threads}, {"seed", options.seed}}},
                   {"payload", out.payload},
                   {"checks", checks_json(out.checks)},
                   {"passed", passed && !out.nonconvergence},
                   {"status", status},
                   {"exit_code", result.exit_code}};
  if (write) {
    std::ofstream f(dir / "report.json", std::ios::binary);
    f << result.report.dump(2) << '\n';
  }
  return result;
}

}  // namespace plap::cli
