#include <doctest.h>

#include <cmath>
#include <vector>

#include "plap/errors.hpp"
#include "plap/oracles.hpp"
#include "plap/parabolic.hpp"

using namespace plap;

namespace {

SolverConfig tight() {
  SolverConfig c;
  c.outer_tol = 1e-12;
  c.relaxation = 1.5;
  return c;
}

// Backward Euler for u_t = u_xx with lumped mass, solved by the Thomas algorithm.
std::vector<double> heat_reference(const Grid& g, std::vector<double> u, double dt, int steps,
                                   double left, double right) {
  const std::size_t n = u.size();
  const double h = g.spacing()[0];
  const double r = dt / (h * h);
  for (int k = 0; k < steps; ++k) {
    std::vector<double> a(n, -r), b(n, 1.0 + 2.0 * r), c(n, -r), d = u;
    b[0] = b[n - 1] = 1.0;
    c[0] = a[n - 1] = 0.0;
    d[0] = left;
    d[n - 1] = right;
    for (std::size_t i = 1; i < n; ++i) {
      const double m = a[i] / b[i - 1];
      b[i] -= m * c[i - 1];
      d[i] -= m * d[i - 1];
    }
    u[n - 1] = d[n - 1] / b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) u[i] = (d[i] - c[i] * u[i + 1]) / b[i];
  }
  return u;
}

ParabolicProblem halfspace_problem(const Grid& g, double p) {
  const ExactSolution ex = catalog("parabolic_halfspace", p, 1);
  return make_parabolic_problem(
      g, p, SpaceTimeFunction([](const Point&, double t) { return t; }), ex.evaluate,
      ScalarField::sample(g, [&](const Point& x) { return ex.evaluate(x, 0.0); }), 0.5);
}

}  // namespace

TEST_CASE("time grid") {
  const TimeGrid tg = make_time_grid(1.0, 0.3);
  CHECK(tg.steps == 4);
  CHECK(tg.dt * tg.steps == doctest::Approx(1.0));
  CHECK(make_time_grid(0.5, 0.125).steps == 4);
  CHECK_THROWS_AS(make_time_grid(1.0, 0.0), ConfigError);
}

TEST_CASE("validation") {
  const Grid g = make_grid_1d(0.0, 1.0, 9);
  auto low = make_parabolic_problem(
      g, 2.0, SpaceTimeFunction([](const Point&, double) { return 1.0; }),
      [](const Point&, double) { return 2.0; }, ScalarField(g, 0.0), 1.0);
  CHECK_THROWS_AS(validate(low, make_time_grid(1.0, 0.25)), ConfigError);
  auto rising = make_parabolic_problem(
      g, 2.0, SpaceTimeFunction([](const Point&, double t) { return t; }),
      [](const Point&, double) { return 0.5; }, ScalarField(g, 1.0), 1.0);
  CHECK_THROWS_AS(validate(rising, make_time_grid(1.0, 0.25)), ConfigError);
  auto bad_p = make_parabolic_problem(g, 1.0, std::nullopt, [](const Point&, double) { return 0.0; },
                                      ScalarField(g, 0.0), 1.0);
  CHECK_THROWS_AS(validate(bad_p, make_time_grid(1.0, 0.25)), ConfigError);
}

TEST_CASE("constant state is stationary") {
  for (double p : {1.5, 2.0, 3.0}) {
    const Grid g = make_grid_2d({0.0, 0.0}, {1.0, 1.0}, 9, 9);
    const auto prob = make_parabolic_problem(
        g, p, SpaceTimeFunction([](const Point& x, double) { return 0.5 - x[0]; }),
        [](const Point&, double) { return 0.7; }, ScalarField(g, 0.7), 1.0);
    const StepResult s = step_implicit(prob.initial, 0.1, 0.1, prob, tight());
    REQUIRE(s.converged);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(s.slice[i] == doctest::Approx(0.7).epsilon(1e-12));
  }
}

TEST_CASE("p = 2 without obstacle matches a backward-Euler heat solver") {
  const Grid g = make_grid_1d(0.0, 1.0, 33);
  const ScalarField init = ScalarField::sample(g, [](const Point& x) { return std::sin(M_PI * x[0]) + x[0]; });
  const auto prob = make_parabolic_problem(g, 2.0, std::nullopt,
                                           [](const Point& x, double) { return x[0]; }, init, 0.25);
  const TimeGrid tg = make_time_grid(0.25, 1.0 / 64.0);
  const ParabolicSolution sol = solve_parabolic(prob, tg, tight());
  REQUIRE(sol.completed);
  const std::vector<double> ref = heat_reference(g, init.values(), tg.dt, tg.steps, 0.0, 1.0);
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(sol.slices.back()[i] - ref[i]) < 1e-9);
}

TEST_CASE("half-space step reproduces the exact profile") {
  for (double p : {2.0, 3.0}) {
    const Grid g = make_grid_1d(-1.0, 1.0, 129);
    const auto prob = halfspace_problem(g, p);
    const ExactSolution ex = catalog("parabolic_halfspace", p, 1);
    const double dt = g.h();
    const StepResult s = step_implicit(prob.initial, dt, dt, prob, tight());
    REQUIRE(s.converged);
    double err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) err = std::max(err, std::abs(s.slice[i] - ex.evaluate(g.coords(i), dt)));
    CHECK(err < 10.0 * (g.h() + dt) * dt);
  }
}

TEST_CASE("slices stay feasible and match the lateral datum") {
  const Grid g = make_grid_1d(-1.0, 1.0, 65);
  const auto prob = halfspace_problem(g, 3.0);
  const TimeGrid tg = make_time_grid(0.25, g.h());
  const ParabolicSolution sol = solve_parabolic(prob, tg, tight());
  REQUIRE(sol.completed);
  for (std::size_t k = 0; k < sol.slices.size(); ++k) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      CHECK(sol.slices[k][i] >= sol.times[k]);
      if (g.is_boundary(i)) CHECK(sol.slices[k][i] == prob.lateral_boundary(g.coords(i), sol.times[k]));
    }
  }
}

TEST_CASE("elliptic solution is a discrete steady state") {
  const Grid g = make_grid_2d({-1.0, -1.0}, {1.0, 1.0}, 17, 17);
  const ScalarField phi = ScalarField::sample(g, [](const Point& x) { return 0.3 - 2.0 * (x[0] * x[0] + x[1] * x[1]); });
  const ScalarField bc(g, -1.0);
  const auto ep = make_elliptic_problem(g, 3.0, phi, ScalarField(g, 0.0), bc);
  const EllipticSolution es = solve_obstacle(ep, tight());
  REQUIRE(es.converged);
  const auto prob = make_parabolic_problem(
      g, 3.0, SpaceTimeFunction([](const Point& x, double) { return 0.3 - 2.0 * (x[0] * x[0] + x[1] * x[1]); }),
      [](const Point&, double) { return -1.0; }, es.u, 0.5);
  const ParabolicSolution sol = solve_parabolic(prob, make_time_grid(0.5, 0.125), tight());
  REQUIRE(sol.completed);
  for (const auto& s : sol.slices)
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(s[i] - es.u[i]) < 1e-7);
  const LipschitzReport rep = time_lipschitz_constant(sol, prob, make_time_grid(0.5, 0.125));
  CHECK(rep.measured < 1e-5);
}

TEST_CASE("translation invariance and comparison in initial data") {
  const Grid g = make_grid_1d(-1.0, 1.0, 65);
  const double shift = 0.37;
  auto obstacle = [](const Point& x, double t) { return 0.2 - x[0] * x[0] + 0.5 * t; };
  auto lateral = [](const Point&, double t) { return 0.5 * t; };
  auto initial = [](const Point& x) { return std::max(0.2 - x[0] * x[0], 0.1 * std::cos(M_PI * x[0] / 2.0)); };
  const TimeGrid tg = make_time_grid(0.25, 1.0 / 32.0);
  for (double p : {1.5, 3.0}) {
    const auto base = make_parabolic_problem(g, p, SpaceTimeFunction(obstacle), lateral,
                                             ScalarField::sample(g, initial), 0.25);
    const auto moved = make_parabolic_problem(
        g, p, SpaceTimeFunction([&](const Point& x, double t) { return obstacle(x, t) + shift; }),
        [&](const Point& x, double t) { return lateral(x, t) + shift; },
        ScalarField::sample(g, [&](const Point& x) { return initial(x) + shift; }), 0.25);
    const auto higher = make_parabolic_problem(
        g, p, SpaceTimeFunction(obstacle), lateral,
        ScalarField::sample(g, [&](const Point& x) { return initial(x) + 0.2 * (1.0 - x[0] * x[0]); }), 0.25);
    const ParabolicSolution a = solve_parabolic(base, tg, tight());
    const ParabolicSolution b = solve_parabolic(moved, tg, tight());
    const ParabolicSolution c = solve_parabolic(higher, tg, tight());
    REQUIRE((a.completed && b.completed && c.completed));
    for (std::size_t k = 0; k < a.slices.size(); ++k)
      for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(std::abs(b.slices[k][i] - a.slices[k][i] - shift) < 1e-8);
        CHECK(c.slices[k][i] >= a.slices[k][i] - 1e-9);
      }
  }
}

TEST_CASE("time Lipschitz constant on the half-space solution") {
  const Grid g = make_grid_1d(-1.0, 1.0, 129);
  const auto prob = halfspace_problem(g, 3.0);
  const TimeGrid tg = make_time_grid(0.25, g.h());
  const ParabolicSolution sol = solve_parabolic(prob, tg, tight());
  REQUIRE(sol.completed);
  const LipschitzReport rep = time_lipschitz_constant(sol, prob, tg);
  CHECK(rep.measured == doctest::Approx(1.0).epsilon(0.02));
  CHECK(rep.bound == doctest::Approx(1.0).epsilon(0.05));
  CHECK(rep.measured <= rep.bound * 1.05);
}

TEST_CASE("traveling wave front moves at its speed") {
  const double p = 3.0;
  const ExactSolution ex = catalog("traveling_wave", p, 1, {{"speed", 1.0}});
  const Grid g = make_grid_1d(0.0, 2.5, 257);
  const auto prob = make_parabolic_problem(
      g, p, SpaceTimeFunction([](const Point&, double) { return 0.0; }), ex.evaluate,
      ScalarField::sample(g, [&](const Point& x) { return ex.evaluate(x, 0.0); }), 0.5);
  const TimeGrid tg = make_time_grid(0.5, g.h());
  SolverConfig c = tight();
  c.outer_tol = 0.0;
  const ParabolicSolution sol = solve_parabolic(prob, tg, c);
  REQUIRE(sol.completed);
  const ScalarField& last = sol.slices.back();
  double front = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (last[i] > 1e-10) front = g.coords(i)[0];
  CHECK(std::abs(front - 1.5) <= 3.0 * (g.h() + tg.dt));
}
