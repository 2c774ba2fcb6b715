// Acceptance driver: one [PASS]/[FAIL] line per criterion, exit status 1 if
// any criterion fails. Scenario runs go through the same pipelines as the CLI.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plap/cli/config.hpp"
#include "plap/cli/expression.hpp"
#include "plap/cli/runner.hpp"
#include "plap/elliptic.hpp"
#include "plap/errors.hpp"
#include "plap/freeboundary.hpp"
#include "plap/oracles.hpp"
#include "plap/parabolic.hpp"
#include "plap/penergy.hpp"

using namespace plap;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

struct Outcome {
  bool passed = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& note) {
    passed = passed && ok;
    notes.push_back(note + (ok ? "" : " (failed)"));
  }
};

int failures = 0;

void report(const std::string& id, const std::string& title, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out.passed = false;
    out.notes.push_back(std::string("exception: ") + e.what());
  }
  std::string detail;
  for (std::size_t i = 0; i < out.notes.size(); ++i) detail += (i ? "; " : "") + out.notes[i];
  if (!out.passed) ++failures;
  std::printf("[%s] %s %s: %s [%.1fs]\n", out.passed ? "PASS" : "FAIL", id.c_str(), title.c_str(), detail.c_str(),
              seconds_since(t0));
  std::fflush(stdout);
}

json run_config(const std::string& name) {
  const cli::ExperimentConfig cfg = cli::load_config(fs::path(PLAP_CONFIG_DIR) / name);
  cli::RunOptions opt;
  opt.write_files = false;
  return cli::run_experiment(cfg, opt).report;
}

const json* find_check(const json& report, const std::string& name) {
  for (const auto& c : report["checks"])
    if (c["name"] == name) return &c;
  return nullptr;
}

double check_value(const json& report, const std::string& name) {
  const json* c = find_check(report, name);
  if (!c || c->at("value").is_null()) return std::nan("");
  return c->at("value").get<double>();
}

bool check_passed(const json& report, const std::string& name) {
  const json* c = find_check(report, name);
  return c && c->at("passed").get<bool>();
}

SolverConfig tight(double tol = 1e-12) {
  SolverConfig c;
  c.outer_tol = tol;
  c.relaxation = 1.8;
  return c;
}

// ---------------------------------------------------------------------------

Outcome c1_psor() {
  Outcome o;
  const auto t0 = Clock::now();
  const Grid g = make_grid_2d({-1.0, -1.0}, {1.0, 1.0}, 65, 65);
  const ScalarField phi = ScalarField::sample(g, [](const Point& x) { return 0.5 - 2.0 * (x[0] * x[0] + x[1] * x[1]); });
  const ScalarField bc = ScalarField::sample(g, [](const Point& x) { return 0.1 * x[0] - 0.2 * x[1] - 1.0; });
  const auto prob = make_elliptic_problem(g, 2.0, phi, ScalarField(g, 0.0), bc);
  SolverConfig c = tight();
  c.relaxation = cli::auto_relaxation(g);
  const EllipticSolution sol = solve_obstacle(prob, c);
  const ScalarField ref = cli::projected_sor(g, phi, prob.rhs, bc, cli::auto_relaxation(g));
  double err = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) err = std::max(err, std::abs(sol.u[i] - ref[i]));
  const double t = seconds_since(t0);
  o.require(sol.converged, "converged in " + std::to_string(sol.sweeps_used) + " sweeps");
  o.require(err <= 1e-8, "max |u - u_psor| = " + fmt(err, 3));
  o.require(!sol.active.empty(), "contact nodes " + std::to_string(sol.active.count()));
  o.require(t <= 10.0, "runtime " + fmt(t, 3) + " s");
  return o;
}

Outcome c2_manufactured() {
  Outcome o;
  const double a = 0.1;
  for (double p : {1.5, 3.0}) {
    const double q = p / (p - 1.0);
    double errs[2] = {0.0, 0.0};
    int idx = 0;
    for (int n : {257, 1025}) {
      const Grid g = make_grid_1d(-1.0, 1.0, n);
      auto exact = [&](const Point& x) { return x[0] > a ? std::pow(x[0] - a, q) : 0.0; };
      const auto prob = make_elliptic_problem(g, p, ScalarField(g, 0.0), ScalarField(g, std::pow(q, p - 1.0)),
                                              ScalarField::sample(g, exact));
      SolverConfig c;
      c.relaxation = cli::auto_relaxation(g);
      const EllipticSolution sol = solve_obstacle(prob, c);
      if (!sol.converged) o.require(false, "p = " + fmt(p) + " n = " + std::to_string(n) + " did not converge");
      for (std::size_t i = 0; i < g.size(); ++i) errs[idx] = std::max(errs[idx], std::abs(sol.u[i] - exact(g.coords(i))));
      // Contact edge: last contact node before the first inactive one.
      const NodeSet gamma = free_boundary(sol, prob);
      double edge = std::nan("");
      for (std::size_t i : gamma.indices())
        if (!g.is_boundary(i)) edge = g.coords(i)[0];
      if (n == 1025) {
        o.require(std::abs(edge - a) <= 2.0 * g.h(),
                  "p = " + fmt(p) + " contact edge " + fmt(edge, 6) + " vs a, 2h = " + fmt(2.0 * g.h(), 3));
      }
      ++idx;
    }
    const double rate = std::log(errs[0] / errs[1]) / std::log(4.0);
    o.require(rate >= 0.8, "p = " + fmt(p) + " errors " + fmt(errs[0], 3) + " -> " + fmt(errs[1], 3) + ", rate " + fmt(rate, 3));
  }
  return o;
}

Outcome growth_runs(const std::vector<std::pair<std::string, std::string>>& runs, double max_seconds) {
  Outcome o;
  for (const auto& [label, file] : runs) {
    const auto t0 = Clock::now();
    const json r = run_config(file);
    const double t = seconds_since(t0);
    const json& g = r["payload"]["growth"];
    const double slope = g.is_object() ? g["fitted_slope"].get<double>() : std::nan("");
    const double expected = g.is_object() ? g["expected_exponent"].get<double>() : std::nan("");
    o.require(check_passed(r, "growth_slope"),
              label + " slope " + fmt(slope) + " (expected " + fmt(expected) + ")");
    if (max_seconds > 0.0) o.require(t <= max_seconds, label + " runtime " + fmt(t, 3) + " s");
  }
  return o;
}

Outcome c5_blowup() {
  Outcome o;
  for (const char* file : {"growth_homogeneous_beta0.5.json", "growth_homogeneous_beta1.json"}) {
    const json r = run_config(file);
    const double f = check_value(r, "blowup_bounded");
    o.require(check_passed(r, "blowup_bounded"), std::string(file) + " variation factor " + fmt(f));
  }
  return o;
}

Outcome c6_nondeg() {
  Outcome o;
  const json r = run_config("nondeg_tilted_dome.json");
  const json& n = r["payload"]["nondeg"];
  o.require(check_passed(r, "nondegeneracy"), "min/max ratio " + fmt(check_value(r, "nondegeneracy")));
  const double eps = n.is_object() ? n["min_ratio"].get<double>() : 0.0;
  o.require(eps > 0.0, "epsilon measured " + fmt(eps));
  return o;
}

Outcome c7_porosity() {
  Outcome o;
  const json r = run_config("porosity_tilted_dome.json");
  const json& p = r["payload"]["porosity"];
  const std::size_t points = p.is_object() ? p["points"].size() : 0;
  o.require(check_passed(r, "porosity_points") && points >= 8, "points " + std::to_string(points));
  o.require(check_passed(r, "porosity_density"), "max density " + fmt(check_value(r, "porosity_density")));
  return o;
}

Outcome c8_lipschitz() {
  Outcome o;
  for (const char* file : {"parabolic_halfspace_p2.json", "parabolic_halfspace_p3.json"}) {
    const auto t0 = Clock::now();
    const json r = run_config(file);
    const double t = seconds_since(t0);
    const json& l = r["payload"]["lipschitz"];
    const double measured = l["measured"].get<double>();
    const double bound = l["bound"].get<double>();
    o.require(check_passed(r, "solver_converged"), std::string(file) + " converged");
    o.require(measured <= 1.05 * bound, std::string(file) + " measured " + fmt(measured, 6) + " <= 1.05 N, N = " + fmt(bound, 6));
    o.require(t <= 300.0, "runtime " + fmt(t, 3) + " s");
  }
  return o;
}

Outcome c10_oracles() {
  Outcome o;
  struct Entry {
    const char* name;
    double p;
    int dim;
    std::map<std::string, double> params;
    int coarse;
  };
  const Entry entries[] = {
      {"parabolic_halfspace", 3.0, 1, {}, 33},
      {"traveling_wave", 4.0, 1, {{"speed", 2.0}}, 33},
      {"source_type", 3.0, 2, {}, 33},
      {"barenblatt", 3.0, 2, {}, 65},
  };
  for (const Entry& e : entries) {
    const ExactSolution ex = catalog(e.name, e.p, e.dim, e.params);
    const ResidualReport good = residual_scan(ex, e.coarse, 3);
    o.require(good.min_rate >= 0.8, std::string(e.name) + " rate " + fmt(good.min_rate, 3));
    const ResidualReport bad = residual_scan(with_constant(ex, 1.1 * ex.constant), e.coarse, 3);
    const double r1 = bad.levels[1].residual;
    const double r2 = bad.levels[2].residual;
    o.require(r2 >= 0.9 * r1 && r2 > 1e-3, std::string(e.name) + " +10% plateau " + fmt(r1, 3) + " -> " + fmt(r2, 3));
  }
  struct AuditCase {
    const char* name;
    double p;
    int dim;
    std::map<std::string, double> params;
  };
  const AuditCase audits[] = {
      {"parabolic_halfspace", 3.0, 1, {}},
      {"traveling_wave", 4.0, 1, {{"speed", 2.0}}},
      {"source_type", 3.0, 2, {}},
  };
  for (const AuditCase& a : audits) {
    const AuditRecord rec = constant_audit(a.name, a.p, a.dim, a.params);
    std::string note = std::string(a.name) + " audited " + fmt(rec.audited, 6) + " hand " + fmt(rec.analytic, 6);
    if (rec.printed) note += " printed " + fmt(*rec.printed, 6);
    if (rec.relative_discrepancy) note += " discrepancy " + fmt(*rec.relative_discrepancy, 3);
    o.require(rec.ok && rec.analytic_agreement <= 1e-3 && rec.printed.has_value() && rec.relative_discrepancy.has_value(),
              note);
  }
  return o;
}

Outcome c11_properties() {
  Outcome o;
  const auto t0 = Clock::now();

  // Energy gradient against central differences.
  {
    const Grid g = make_grid_2d({0.0, 0.0}, {1.0, 1.0}, 9, 9);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    double worst = 0.0;
    for (double p : {1.5, 2.0, 3.0}) {
      ScalarField v(g);
      for (std::size_t i = 0; i < g.size(); ++i) v[i] = d(rng);
      ScalarField f(g);
      for (std::size_t i = 0; i < g.size(); ++i) f[i] = d(rng);
      const EnergyParams params = make_energy_params(g, p, f);
      const ScalarField grad = energy_gradient(v, params);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = 1e-6;
        ScalarField a = v, b = v;
        a[i] += s;
        b[i] -= s;
        const double fd = (total_energy(a, params) - total_energy(b, params)) / (2.0 * s);
        worst = std::max(worst, std::abs(fd - grad[i]) / std::max(1.0, std::abs(grad[i])));
      }
    }
    o.require(worst <= 1e-6, "gradient fd rel err " + fmt(worst, 2));
  }

  const Grid g = make_grid_2d({-1.0, -1.0}, {1.0, 1.0}, 17, 17);
  auto dome = [&](double p, double lift) {
    return make_elliptic_problem(
        g, p, ScalarField::sample(g, [&](const Point& x) { return 0.3 - 2.0 * (x[0] * x[0] + x[1] * x[1]) + lift; }),
        ScalarField(g, 0.0), ScalarField::sample(g, [](const Point& x) { return -1.0 + 0.2 * x[0]; }));
  };

  // Energy monotonicity and feasibility.
  {
    bool mono = true;
    bool feasible = true;
    for (double p : {1.5, 2.0, 3.0}) {
      const auto prob = dome(p, 0.0);
      SolverConfig c = tight(1e-14);
      c.record_energy = true;
      c.max_sweeps = 80;
      const EllipticSolution sol = solve_obstacle(prob, c);
      const auto& e = sol.energy_history;
      for (std::size_t k = 1; k < e.size(); ++k) mono = mono && e[k] <= e[k - 1] + 1e-14 * (1.0 + std::abs(e[0]));
      for (std::size_t i = 0; i < g.size(); ++i) feasible = feasible && sol.u[i] >= (*prob.obstacle)[i];
    }
    o.require(mono, "energy monotone per sweep");
    o.require(feasible, "iterates feasible");
  }

  // Elliptic comparison in the obstacle and the boundary data.
  {
    bool ok = true;
    for (double p : {1.5, 3.0}) {
      const EllipticSolution lo = solve_obstacle(dome(p, 0.0), tight());
      const EllipticSolution hi = solve_obstacle(dome(p, 0.2), tight());
      EllipticProblem raised = dome(p, 0.0);
      for (std::size_t i = 0; i < g.size(); ++i) raised.boundary_values[i] += 0.3;
      const EllipticSolution up = solve_obstacle(raised, tight());
      for (std::size_t i = 0; i < g.size(); ++i)
        ok = ok && hi.u[i] >= lo.u[i] - 1e-10 && up.u[i] >= lo.u[i] - 1e-10;
    }
    o.require(ok, "elliptic comparison");
  }

  // Parabolic comparison in the initial datum.
  {
    const Grid g1 = make_grid_1d(-1.0, 1.0, 65);
    auto obstacle = [](const Point& x, double t) { return 0.2 - x[0] * x[0] + 0.5 * t; };
    auto lateral = [](const Point&, double t) { return 0.5 * t; };
    auto init = [](const Point& x) { return std::max(0.2 - x[0] * x[0], 0.1 * std::cos(M_PI * x[0] / 2.0)); };
    bool ok = true;
    const TimeGrid tg = make_time_grid(0.25, 1.0 / 32.0);
    for (double p : {2.0, 3.0}) {
      const auto a = make_parabolic_problem(g1, p, SpaceTimeFunction(obstacle), lateral, ScalarField::sample(g1, init), 0.25);
      const auto b = make_parabolic_problem(
          g1, p, SpaceTimeFunction(obstacle), lateral,
          ScalarField::sample(g1, [&](const Point& x) { return init(x) + 0.2 * (1.0 - x[0] * x[0]); }), 0.25);
      const ParabolicSolution sa = solve_parabolic(a, tg, tight());
      const ParabolicSolution sb = solve_parabolic(b, tg, tight());
      ok = ok && sa.completed && sb.completed;
      for (std::size_t k = 0; k < sa.slices.size(); ++k)
        for (std::size_t i = 0; i < g1.size(); ++i) ok = ok && sb.slices[k][i] >= sa.slices[k][i] - 1e-9;
    }
    o.require(ok, "parabolic comparison");
  }

  // Parser round trip on random trees.
  {
    std::mt19937 rng(11);
    std::function<cli::Expression(int)> gen = [&](int depth) {
      cli::Expression e;
      const int k = static_cast<int>(rng() % (depth <= 0 ? 2 : 6));
      if (k == 0) {
        e.kind = cli::NodeKind::number;
        e.value = std::uniform_real_distribution<double>(0.0, 50.0)(rng);
      } else if (k == 1) {
        e.kind = cli::NodeKind::variable;
        e.name = std::string(1, "xyt"[rng() % 3]);
      } else if (k == 2) {
        e.kind = cli::NodeKind::negate;
        e.args.push_back(gen(depth - 1));
      } else if (k == 3) {
        e.kind = cli::NodeKind::call;
        e.name = (rng() % 2) ? "max" : "pow";
        e.args.push_back(gen(depth - 1));
        e.args.push_back(gen(depth - 1));
      } else {
        static const cli::NodeKind ops[] = {cli::NodeKind::add, cli::NodeKind::subtract, cli::NodeKind::multiply,
                                            cli::NodeKind::divide, cli::NodeKind::power};
        e.kind = ops[rng() % 5];
        e.args.push_back(gen(depth - 1));
        e.args.push_back(gen(depth - 1));
      }
      return e;
    };
    int good = 0;
    for (int i = 0; i < 1000; ++i) {
      const cli::Expression e = gen(5);
      if (cli::parse_expression(cli::to_string(e)) == e) ++good;
    }
    o.require(good == 1000, "parser round trip " + std::to_string(good) + "/1000");
  }

  // Bit-identical reruns.
  {
    const auto prob = dome(3.0, 0.0);
    const EllipticSolution a = solve_obstacle(prob, tight());
    const EllipticSolution b = solve_obstacle(prob, tight());
    const json ra = run_config("convergence_psor_p2.json");
    const json rb = run_config("convergence_psor_p2.json");
    o.require(a.u.values() == b.u.values() && ra.dump() == rb.dump(), "bit-identical reruns");
  }

  const double t = seconds_since(t0);
  o.require(t <= 600.0, "runtime " + fmt(t, 3) + " s");
  return o;
}

}  // namespace

int main() {
  report("C1", "p = 2 projected SOR equivalence", c1_psor);
  report("C2", "manufactured 1D half-space convergence", c2_manufactured);
  report("C3", "inhomogeneous growth exponent", [] {
    return growth_runs({{"p = 1.5", "growth_inhomogeneous_p1.5.json"},
                        {"p = 2", "growth_inhomogeneous_p2.json"},
                        {"p = 3", "growth_inhomogeneous_p3.json"}},
                       300.0);
  });
  report("C4", "homogeneous growth exponent", [] {
    return growth_runs({{"beta = 0.5", "growth_homogeneous_beta0.5.json"},
                        {"beta = 1", "growth_homogeneous_beta1.json"}},
                       0.0);
  });
  report("C5", "blow-up uniform boundedness", c5_blowup);
  report("C6", "non-degeneracy", c6_nondeg);
  report("C7", "porosity of the free boundary", c7_porosity);
  report("C8", "Lipschitz in time", c8_lipschitz);
  report("C9", "parabolic growth exponent", [] {
    return growth_runs({{"p = 3", "parabolic_growth_p3.json"}}, 0.0);
  });
  report("C10", "exact-solution residuals and constant audits", c10_oracles);
  report("C11", "property suites", c11_properties);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
