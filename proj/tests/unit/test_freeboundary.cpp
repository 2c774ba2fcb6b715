#include <doctest.h>

#include <cmath>

#include "plap/errors.hpp"
#include "plap/freeboundary.hpp"

using namespace plap;

namespace {

SolverConfig tight() {
  SolverConfig c;
  c.outer_tol = 1e-12;
  c.relaxation = 1.8;
  return c;
}

struct HalfSpace {
  Grid grid;
  EllipticProblem problem;
  EllipticSolution solution;
  double a = 0.1;
  double q = 1.5;
};

HalfSpace halfspace_1d(double p, int n) {
  HalfSpace hs;
  hs.q = p / (p - 1.0);
  hs.grid = make_grid_1d(-1.0, 1.0, n);
  const double a = hs.a;
  const double q = hs.q;
  hs.problem = make_elliptic_problem(
      hs.grid, p, ScalarField(hs.grid, 0.0), ScalarField(hs.grid, std::pow(q, p - 1.0)),
      ScalarField::sample(hs.grid, [=](const Point& x) { return x[0] > a ? std::pow(x[0] - a, q) : 0.0; }));
  hs.solution = solve_obstacle(hs.problem, tight());
  return hs;
}

// p = 2, f = 1, zero obstacle, radial data: contact is a disc of radius 0.4.
struct Disc {
  EllipticProblem problem;
  EllipticSolution solution;
};

Disc radial_disc(int n) {
  const Grid g = make_grid_2d({-1.0, -1.0}, {1.0, 1.0}, n, n);
  const double r0 = 0.4;
  auto exact = [=](const Point& x) {
    const double r = std::hypot(x[0], x[1]);
    if (r <= r0) return 0.0;
    return 0.25 * (r * r - r0 * r0) - 0.5 * r0 * r0 * std::log(r / r0);
  };
  Disc d;
  d.problem = make_elliptic_problem(g, 2.0, ScalarField(g, 0.0), ScalarField(g, 1.0), ScalarField::sample(g, exact));
  d.solution = solve_obstacle(d.problem, tight());
  return d;
}

}  // namespace

TEST_CASE("contact sets") {
  SUBCASE("obstacle far below gives no contact") {
    const Grid g = make_grid_2d({0.0, 0.0}, {1.0, 1.0}, 9, 9);
    const auto prob = make_elliptic_problem(g, 3.0, ScalarField(g, -5.0), ScalarField(g, 0.0), ScalarField(g, 1.0));
    const EllipticSolution sol = solve_obstacle(prob, tight());
    CHECK(contact_set(sol).empty());
    CHECK(free_boundary(sol, prob).empty());
  }
  SUBCASE("strict supersolution obstacle gives full contact") {
    const Grid g = make_grid_2d({-1.0, -1.0}, {1.0, 1.0}, 9, 9);
    const ScalarField phi = ScalarField::sample(g, [](const Point& x) { return -x[0] * x[0] - x[1] * x[1]; });
    const auto prob = make_elliptic_problem(g, 3.0, phi, ScalarField(g, 0.0), phi);
    const EllipticSolution sol = solve_obstacle(prob, tight());
    CHECK(contact_set(sol).count() == 7u * 7u);
  }
  SUBCASE("1D half-space contact is {x <= a} up to one cell") {
    const HalfSpace hs = halfspace_1d(3.0, 129);
    const NodeSet c = contact_set(hs.solution);
    for (std::size_t i = 1; i + 1 < hs.grid.size(); ++i) {
      const double x = hs.grid.coords(i)[0];
      if (x < hs.a - hs.grid.h()) CHECK(c.contains(i));
      if (x > hs.a + hs.grid.h()) CHECK_FALSE(c.contains(i));
    }
    const ContactCrossCheck cc = contact_set_threshold(hs.solution, hs.problem, 10.0 * hs.solution.outer_tol);
    CHECK(cc.symmetric_difference <= 2u);
  }
}

TEST_CASE("free boundary extraction") {
  SUBCASE("1D half-space gives a single node near a") {
    const HalfSpace hs = halfspace_1d(3.0, 129);
    const NodeSet gamma = free_boundary(hs.solution, hs.problem);
    REQUIRE(gamma.count() == 1u);
    CHECK(std::abs(hs.grid.coords(gamma.indices()[0])[0] - hs.a) <= hs.grid.h());
  }
  SUBCASE("radial disc gives a ring growing like r / h") {
    std::size_t prev = 0;
    for (int n : {33, 65}) {
      const Disc d = radial_disc(n);
      const NodeSet gamma = free_boundary(d.solution, d.problem);
      const NodeSet active = contact_set(d.solution);
      for (std::size_t i : gamma.indices()) {
        CHECK(active.contains(i));
        bool has_inactive = false;
        for (std::size_t j : d.problem.grid.axis_neighbors(i)) has_inactive |= !active.contains(j);
        CHECK(has_inactive);
        CHECK(std::abs(distance(d.problem.grid.coords(i), {0.0, 0.0}) - 0.4) < 3.0 * d.problem.grid.h());
      }
      if (prev > 0) CHECK(static_cast<double>(gamma.count()) / prev == doctest::Approx(2.0).epsilon(0.25));
      prev = gamma.count();
    }
  }
  SUBCASE("snapping") {
    const Grid g = make_grid_1d(0.0, 1.0, 11);
    NodeSet gamma(g);
    CHECK_THROWS_AS(snap_to_free_boundary(gamma, {0.5, 0.0}), MeasurementError);
    gamma.insert(3);
    gamma.insert(8);
    CHECK(snap_to_free_boundary(gamma, {0.6, 0.0}) == 8u);
  }
}

TEST_CASE("growth supremum") {
  SUBCASE("affine u gives zero") {
    const Grid g = make_grid_2d({-1.0, -1.0}, {1.0, 1.0}, 33, 33);
    const ScalarField u = ScalarField::sample(g, [](const Point& x) { return 2.0 * x[0] - x[1] + 0.3; });
    const std::size_t c = g.nearest_node({0.0, 0.0});
    for (double r : {0.1, 0.2, 0.4}) CHECK(growth_sup(u, c, r, {2.0, -1.0}) < 1e-13);
    CHECK_THROWS_AS(growth_sup(u, c, 1.5, {2.0, -1.0}), MeasurementError);
  }
  SUBCASE("half-space profile gives r^q and monotone sups") {
    const double q = 1.5;
    const Grid g = make_grid_1d(-1.0, 1.0, 1025);
    const ScalarField u = ScalarField::sample(g, [=](const Point& x) { return x[0] > 0 ? std::pow(x[0], q) : 0.0; });
    const std::size_t c = g.nearest_node({0.0, 0.0});
    double prev = 0.0;
    for (double r : {0.05, 0.1, 0.2, 0.4}) {
      const double s = growth_sup(u, c, r, {0.0, 0.0});
      CHECK(s == doctest::Approx(std::pow(r, q)).epsilon(1e-2));
      CHECK(s >= prev);
      prev = s;
    }
  }
  SUBCASE("solved half-space doubling ratio") {
    const HalfSpace hs = halfspace_1d(3.0, 513);
    const NodeSet gamma = free_boundary(hs.solution, hs.problem);
    const auto radii = dyadic_radii(0.4, 4, hs.grid.h());
    const GrowthFit fit = measure_growth(hs.solution.u, gamma, {hs.a, 0.0}, radii,
                                         GradientSource::analytic_obstacle,
                                         [](const Point&) { return Vec{0.0, 0.0}; }, 1.5);
    CHECK(fit.fitted_slope == doctest::Approx(1.5).epsilon(0.1));
    for (std::size_t k = 0; k + 1 < fit.sups.size(); ++k)
      CHECK(fit.sups[k] <= std::pow(2.0, 1.5) * 1.15 * fit.sups[k + 1]);
  }
}

TEST_CASE("reference gradient") {
  const Grid g = make_grid_2d({-1.0, -1.0}, {1.0, 1.0}, 17, 17);
  const ScalarField u = ScalarField::sample(g, [](const Point& x) { return 3.0 * x[0] + x[1]; });
  const std::size_t c = g.nearest_node({0.25, 0.0});
  const Vec num = reference_gradient(u, c, GradientSource::numeric, nullptr);
  CHECK(num[0] == doctest::Approx(3.0));
  CHECK(num[1] == doctest::Approx(1.0));
  const Vec ana = reference_gradient(u, c, GradientSource::analytic_obstacle, [](const Point&) { return Vec{7.0, 8.0}; });
  CHECK(ana[0] == 7.0);
  CHECK(ana[1] == 8.0);
}

TEST_CASE("dyadic radii and exponent fits") {
  const auto radii = dyadic_radii(0.5, 4, 1.0 / 256.0);
  REQUIRE(radii.size() == 4u);
  CHECK(radii[3] == doctest::Approx(0.0625));
  CHECK_THROWS_AS(dyadic_radii(0.5, 6, 1.0 / 64.0), MeasurementError);

  std::vector<double> sq, three;
  for (double r : radii) {
    sq.push_back(r * r);
    three.push_back(3.0 * std::pow(r, 1.5));
  }
  const ExponentFit a = fit_exponent(radii, sq);
  CHECK(std::abs(a.slope - 2.0) < 1e-12);
  CHECK(a.rss < 1e-20);
  const ExponentFit b = fit_exponent(radii, three);
  CHECK(std::abs(b.slope - 1.5) < 1e-12);
  CHECK(std::abs(b.intercept - std::log(3.0)) < 1e-12);

  std::vector<double> with_zero = sq;
  with_zero.push_back(0.0);
  std::vector<double> more = radii;
  more.push_back(radii.back() / 2.0);
  const ExponentFit c = fit_exponent(more, with_zero);
  CHECK(c.dropped == 1u);
  CHECK(c.used == 4u);
  CHECK_THROWS_AS(fit_exponent({0.4, 0.2, 0.1}, {1.0, 0.5, 0.25}), MeasurementError);
}

TEST_CASE("expected growth exponent") {
  CHECK(expected_growth_exponent(3.0, 1.0, false) == doctest::Approx(1.5));
  CHECK(expected_growth_exponent(1.5, 1.0, false) == doctest::Approx(2.0));
  CHECK(expected_growth_exponent(3.0, 0.3, false) == doctest::Approx(1.3));
  CHECK(expected_growth_exponent(3.0, 1.0, true) == doctest::Approx(2.0));
}

TEST_CASE("non-degeneracy profile") {
  const Grid g = make_grid_2d({-1.0, -1.0}, {1.0, 1.0}, 65, 65);
  const double eps0 = 0.3;
  auto phi_fn = [](const Point& x) { return -x[0] * x[0] - x[1] * x[1]; };
  const ScalarField phi = ScalarField::sample(g, phi_fn);
  const auto prob = make_elliptic_problem(g, 3.0, phi, ScalarField(g, 0.0), phi);
  const Point x0{-0.5, 0.0};
  NondegHypotheses hyp;
  hyp.obstacle_strict_supersolution = true;

  SUBCASE("barrier data gives min ratio eps0") {
    EllipticSolution sol;
    sol.u = ScalarField::sample(g, [&](const Point& x) {
      return phi_fn(x) + (x[0] > x0[0] ? eps0 * (std::pow(x[0] - x0[0], 2) + x[1] * x[1]) : 0.0);
    });
    sol.active = NodeSet(g);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!g.is_boundary(i) && g.coords(i)[0] <= x0[0]) sol.active.insert(i);
    const NondegReport rep = nondegeneracy_profile(sol, prob, x0, {0.1, 0.2, 0.4}, g.h() / 2.0, hyp);
    CHECK(rep.min_ratio == doctest::Approx(eps0).epsilon(0.1));
    for (std::size_t k = 0; k + 1 < rep.ball_sup.size(); ++k) CHECK(rep.ball_sup[k] <= rep.ball_sup[k + 1]);
  }
  SUBCASE("full contact flags degeneracy") {
    const EllipticSolution sol = solve_obstacle(prob, tight());
    const NondegReport rep = nondegeneracy_profile(sol, prob, {0.0, 0.0}, {0.1, 0.2}, g.h() / 2.0, hyp);
    for (bool d : rep.degenerate) CHECK(d);
    CHECK(rep.min_ratio == 0.0);
  }
  SUBCASE("hypothesis violations") {
    EllipticSolution sol;
    sol.u = phi;
    sol.active = NodeSet(g);
    NondegHypotheses bad = hyp;
    bad.p = 2.0;
    CHECK_THROWS_AS(nondegeneracy_profile(sol, prob, x0, {0.1}, g.h(), bad), PreconditionError);
    bad = hyp;
    bad.rhs_max_abs = 1.0;
    CHECK_THROWS_AS(nondegeneracy_profile(sol, prob, x0, {0.1}, g.h(), bad), PreconditionError);
    bad = hyp;
    bad.obstacle_strict_supersolution = false;
    CHECK_THROWS_AS(nondegeneracy_profile(sol, prob, x0, {0.1}, g.h(), bad), PreconditionError);
  }
}

TEST_CASE("porosity density") {
  const Grid g = make_grid_2d({-1.0, -1.0}, {1.0, 1.0}, 65, 65);
  const std::size_t y = g.nearest_node({0.0, 0.0});
  NodeSet single(g);
  single.insert(y);
  const double r = 10.0 * g.h();
  const double d1 = porosity_density(single, {0.0, 0.0}, r);
  CHECK(d1 > 0.0);
  CHECK(d1 < 0.01);
  NodeSet all(g);
  for (std::size_t i = 0; i < g.size(); ++i) all.insert(i);
  CHECK(porosity_density(all, {0.0, 0.0}, r) == doctest::Approx(1.0));
  CHECK_THROWS_AS(porosity_density(single, {0.0, 0.0}, 2.0 * g.h()), MeasurementError);

  const Disc d = radial_disc(65);
  const NodeSet gamma = free_boundary(d.solution, d.problem);
  const auto pts = sample_free_boundary(gamma, 8, 0.2);
  REQUIRE(pts.size() == 8u);
  const PorosityReport rep = porosity_report(gamma, pts, {0.15, 0.2});
  CHECK(rep.max_density < 0.3);
  CHECK(rep.delta_measured == doctest::Approx(1.0 - rep.max_density));
  for (const auto& row : rep.densities)
    for (double v : row) CHECK((v >= 0.0 && v <= 1.0));

  // Shifting u and phi together leaves Gamma and the density unchanged.
  EllipticSolution shifted = d.solution;
  for (std::size_t i = 0; i < shifted.u.size(); ++i) shifted.u[i] += 2.0;
  EllipticProblem moved = d.problem;
  for (std::size_t i = 0; i < moved.grid.size(); ++i) (*moved.obstacle)[i] += 2.0;
  const NodeSet gamma2 = free_boundary(shifted, moved);
  CHECK(gamma2 == gamma);
}

TEST_CASE("blow-up rescaling") {
  const Grid g = make_grid_2d({-1.0, -1.0}, {1.0, 1.0}, 257, 257);
  const Point y{0.1, -0.05};
  const double alpha = 0.5;
  const ScalarField u = ScalarField::sample(g, [&](const Point& x) { return std::pow(distance(x, y), 1.0 + alpha); });
  const BlowupField a = blowup_rescale(u, y, 0.4, alpha, std::nullopt, 3.0);
  const BlowupField b = blowup_rescale(u, y, 0.2, alpha, std::nullopt, 3.0);
  CHECK(a.u[a.u.grid().nearest_node({0.0, 0.0})] == 0.0);
  double diff = 0.0;
  for (std::size_t i = 0; i < a.u.size(); ++i) diff = std::max(diff, std::abs(a.u[i] - b.u[i]));
  CHECK(diff < 0.02);
  CHECK(a.half_ball_max == doctest::Approx(std::pow(0.5, 1.5)).epsilon(0.05));
  CHECK_THROWS_AS(blowup_rescale(u, y, 0.95, alpha, std::nullopt, 3.0), MeasurementError);

  const ScalarField f(g, 2.0);
  const BlowupField c = blowup_rescale(u, y, 0.1, 0.5, f, 3.0);
  REQUIRE(c.rhs.has_value());
  for (std::size_t i = 0; i < c.rhs->size(); ++i) CHECK((*c.rhs)[i] == doctest::Approx(2.0));
}

TEST_CASE("parabolic growth supremum") {
  const Grid g = make_grid_1d(-1.0, 1.0, 65);
  ParabolicSolution sol;
  for (int k = 0; k <= 4; ++k) {
    sol.times.push_back(0.1 * k);
    sol.slices.push_back(ScalarField::sample(g, [](const Point& x) { return 1.0 + 2.0 * x[0]; }));
  }
  const std::size_t c = g.nearest_node({0.0, 0.0});
  CHECK(parabolic_growth_sup(sol, 4, c, 0.3, 3.0, {2.0, 0.0}) < 1e-13);

  // Half-space profile plus t: both terms scale like r^q over the cylinder.
  const double p = 3.0;
  const double q = 1.5;
  const double cp = 2.0 / 3.0;
  const Grid fine = make_grid_1d(-1.0, 1.0, 513);
  ParabolicSolution hs;
  const double dt = 1.0 / 1024.0;
  for (int k = 0; k <= 512; ++k) {
    const double t = k * dt;
    hs.times.push_back(t);
    hs.slices.push_back(ScalarField::sample(fine, [&](const Point& x) { return (x[0] > 0 ? cp * std::pow(x[0], q) : 0.0) + t; }));
  }
  const std::size_t c0 = fine.nearest_node({0.0, 0.0});
  std::vector<double> radii{0.4, 0.2, 0.1, 0.05};
  std::vector<double> sups;
  for (double r : radii) sups.push_back(parabolic_growth_sup(hs, 512, c0, r, p, {0.0, 0.0}));
  CHECK(fit_exponent(radii, sups).slope == doctest::Approx(q).epsilon(0.05));
}
