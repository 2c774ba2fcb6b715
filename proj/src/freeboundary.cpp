#include "plap/freeboundary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "plap/errors.hpp"

namespace plap {

NodeSet contact_set(const EllipticSolution& solution) { return solution.active; }

ContactCrossCheck contact_set_threshold(const EllipticSolution& solution,
                                        const EllipticProblem& problem, double threshold) {
  ContactCrossCheck out{NodeSet(problem.grid), 0};
  if (!problem.obstacle) return out;
  for (std::size_t i = 0; i < problem.grid.size(); ++i) {
    if (problem.boundary_mask.contains(i)) continue;
    const bool touching = solution.u[i] - (*problem.obstacle)[i] <= threshold;
    if (touching) out.thresholded.insert(i);
    if (touching != solution.active.contains(i)) ++out.symmetric_difference;
  }
  return out;
}

NodeSet free_boundary(const NodeSet& active, const ScalarField& u,
                      const std::optional<ScalarField>& obstacle, const NodeSet& boundary_mask) {
  const Grid& grid = u.grid();
  auto in_contact = [&](std::size_t i) {
    if (boundary_mask.contains(i)) return obstacle && u[i] <= (*obstacle)[i];
    return active.contains(i);
  };
  NodeSet gamma(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (boundary_mask.contains(i) || !active.contains(i)) continue;
    for (std::size_t nb : grid.axis_neighbors(i)) {
      if (!in_contact(nb)) {
        gamma.insert(i);
        break;
      }
    }
  }
  return gamma;
}

NodeSet free_boundary(const EllipticSolution& solution, const EllipticProblem& problem) {
  return free_boundary(solution.active, solution.u, problem.obstacle, problem.boundary_mask);
}

std::size_t snap_to_free_boundary(const NodeSet& gamma, const Point& anchor) {
  const Grid& grid = gamma.grid();
  std::size_t best = grid.size();
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!gamma.contains(i)) continue;
    const double d = distance(grid.coords(i), anchor);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  if (best == grid.size()) throw MeasurementError("free boundary is empty");
  return best;
}

double growth_sup(const ScalarField& u, std::size_t center_node, double r, const Vec& gradient) {
  const Grid& grid = u.grid();
  const Point y = grid.coords(center_node);
  if (!ball_inside_domain(grid, y, r)) {
    std::ostringstream os;
    os << "measurement ball of radius " << r << " leaves the domain";
    throw MeasurementError(os.str());
  }
  const double uy = u[center_node];
  double sup = 0.0;
  for (std::size_t i : nodes_in_ball(grid, y, r).indices()) {
    const Point x = grid.coords(i);
    const double tangent = uy + (x[0] - y[0]) * gradient[0] + (x[1] - y[1]) * gradient[1];
    sup = std::max(sup, std::abs(u[i] - tangent));
  }
  return sup;
}

Vec reference_gradient(const ScalarField& u, std::size_t node, GradientSource source,
                       const GradientFunction& obstacle_gradient) {
  if (source == GradientSource::analytic_obstacle && obstacle_gradient) {
    return obstacle_gradient(u.grid().coords(node));
  }
  return gradient_at(u, node).value;
}

std::vector<double> dyadic_radii(double r_max, int count, double h, double min_cells) {
  if (count < 1 || !(r_max > 0.0)) throw MeasurementError("invalid dyadic radii request");
  std::vector<double> radii;
  for (int k = 0; k < count; ++k) radii.push_back(std::ldexp(r_max, -k));
  if (radii.back() < min_cells * h * (1.0 - 1e-12)) {
    std::ostringstream os;
    os << "smallest radius " << radii.back() << " is below " << min_cells << " h = " << min_cells * h;
    throw MeasurementError(os.str());
  }
  return radii;
}

ExponentFit fit_exponent(const std::vector<double>& radii, const std::vector<double>& sups) {
  if (radii.size() != sups.size()) throw MeasurementError("radii and sups differ in length");
  std::vector<double> xs;
  std::vector<double> ys;
  ExponentFit fit;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (sups[k] > 0.0 && radii[k] > 0.0) {
      xs.push_back(std::log(radii[k]));
      ys.push_back(std::log(sups[k]));
    } else {
      ++fit.dropped;
    }
  }
  fit.used = xs.size();
  if (fit.used < 4) {
    std::ostringstream os;
    os << "exponent fit needs at least 4 positive samples (have " << fit.used << ")";
    throw MeasurementError(os.str());
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
  }
  if (!(sxx > 0.0)) throw MeasurementError("radii must be distinct");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double e = ys[k] - (fit.intercept + fit.slope * xs[k]);
    fit.rss += e * e;
  }
  return fit;
}

double expected_growth_exponent(double p, double beta, bool homogeneous) {
  if (homogeneous) return 1.0 + beta;
  return 1.0 + std::min(1.0 / (p - 1.0), beta);
}

GrowthFit measure_growth(const ScalarField& u, const NodeSet& gamma, const Point& anchor,
                         const std::vector<double>& radii, GradientSource source,
                         const GradientFunction& obstacle_gradient, double expected_exponent) {
  GrowthFit g;
  g.center_node = snap_to_free_boundary(gamma, anchor);
  g.center = u.grid().coords(g.center_node);
  g.radii = radii;
  for (std::size_t k = 1; k < radii.size(); ++k) {
    if (!(radii[k] < radii[k - 1])) throw MeasurementError("radii must be strictly decreasing");
  }
  const Vec grad = reference_gradient(u, g.center_node, source, obstacle_gradient);
  for (double r : radii) g.sups.push_back(growth_sup(u, g.center_node, r, grad));
  const ExponentFit fit = fit_exponent(g.radii, g.sups);
  g.fitted_slope = fit.slope;
  g.fitted_intercept = fit.intercept;
  g.rss = fit.rss;
  g.dropped = fit.dropped;
  g.expected_exponent = expected_exponent;
  g.alpha_used = expected_exponent - 1.0;
  return g;
}

NondegReport nondegeneracy_profile(const EllipticSolution& solution, const EllipticProblem& problem,
                                   const Point& x0, const std::vector<double>& radii,
                                   double shell_half_width, const NondegHypotheses& hyp) {
  if (!(hyp.p > 2.0)) throw PreconditionError("non-degeneracy requires p > 2");
  if (hyp.rhs_max_abs != 0.0) throw PreconditionError("non-degeneracy requires f = 0");
  if (!hyp.obstacle_strict_supersolution) {
    throw PreconditionError("non-degeneracy requires a certified Delta_p phi < 0");
  }
  if (!problem.obstacle) throw PreconditionError("non-degeneracy requires an obstacle");
  const Grid& grid = problem.grid;
  const ScalarField& phi = *problem.obstacle;
  NondegReport rep;
  rep.center = x0;
  rep.radii = radii;
  rep.min_ratio = std::numeric_limits<double>::infinity();
  for (double r : radii) {
    if (!ball_inside_domain(grid, x0, r + shell_half_width)) {
      throw MeasurementError("non-degeneracy shell leaves the domain");
    }
    double shell = 0.0;
    bool any = false;
    for (std::size_t i : nodes_on_shell(grid, x0, r, shell_half_width).indices()) {
      if (solution.active.contains(i)) continue;
      any = true;
      shell = std::max(shell, solution.u[i] - phi[i]);
    }
    double ball = 0.0;
    for (std::size_t i : nodes_in_ball(grid, x0, r).indices()) {
      ball = std::max(ball, solution.u[i] - phi[i]);
    }
    rep.shell_sup.push_back(shell);
    rep.ball_sup.push_back(ball);
    rep.degenerate.push_back(!any || shell <= 0.0);
    const double ratio = shell / (r * r);
    rep.min_ratio = std::min(rep.min_ratio, ratio);
    rep.max_ratio = std::max(rep.max_ratio, ratio);
  }
  if (radii.empty()) rep.min_ratio = 0.0;
  rep.epsilon_measured = rep.min_ratio;
  return rep;
}

double porosity_density(const NodeSet& gamma, const Point& y, double r) {
  const Grid& grid = gamma.grid();
  const double h = grid.h();
  if (r < 4.0 * h * (1.0 - 1e-12)) {
    std::ostringstream os;
    os << "porosity radius " << r << " is below 4 h = " << 4.0 * h;
    throw MeasurementError(os.str());
  }
  const auto n = grid.counts();
  const int cells_x = n[0] - 1;
  const int cells_y = grid.dim() == 2 ? n[1] - 1 : 1;
  std::vector<std::uint8_t> owned(static_cast<std::size_t>(cells_x) * cells_y, 0);
  for (std::size_t node : gamma.indices()) {
    const auto ij = grid.multi_index(node);
    const int ci = std::min(ij[0], cells_x - 1);
    const int cj = grid.dim() == 2 ? std::min(ij[1], cells_y - 1) : 0;
    owned[static_cast<std::size_t>(cj) * cells_x + ci] = 1;
  }
  const Vec& hs = grid.spacing();
  const Point& lo = grid.domain().lo;
  std::size_t total = 0;
  std::size_t hit = 0;
  for (int cj = 0; cj < cells_y; ++cj) {
    for (int ci = 0; ci < cells_x; ++ci) {
      Point c{lo[0] + (ci + 0.5) * hs[0], 0.0};
      if (grid.dim() == 2) c[1] = lo[1] + (cj + 0.5) * hs[1];
      if (distance(c, y) > r) continue;
      ++total;
      hit += owned[static_cast<std::size_t>(cj) * cells_x + ci];
    }
  }
  if (total == 0) return 0.0;
  return static_cast<double>(hit) / static_cast<double>(total);
}

PorosityReport porosity_report(const NodeSet& gamma, const std::vector<std::size_t>& points,
                               const std::vector<double>& radii) {
  PorosityReport rep;
  rep.radii = radii;
  for (std::size_t node : points) {
    if (!gamma.contains(node)) throw MeasurementError("porosity point is not on the free boundary");
    const Point y = gamma.grid().coords(node);
    rep.points.push_back(y);
    std::vector<double> row;
    for (double r : radii) {
      const double d = porosity_density(gamma, y, r);
      row.push_back(d);
      rep.max_density = std::max(rep.max_density, d);
    }
    rep.densities.push_back(std::move(row));
  }
  rep.delta_measured = 1.0 - rep.max_density;
  return rep;
}

std::vector<std::size_t> sample_free_boundary(const NodeSet& gamma, std::size_t count, double r_max) {
  std::vector<std::size_t> eligible;
  for (std::size_t i : gamma.indices()) {
    if (ball_inside_domain(gamma.grid(), gamma.grid().coords(i), r_max)) eligible.push_back(i);
  }
  if (eligible.size() <= count) return eligible;
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < count; ++k) {
    out.push_back(eligible[(k * (eligible.size() - 1)) / (count - 1 == 0 ? 1 : count - 1)]);
  }
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

BlowupField blowup_rescale(const ScalarField& u, const Point& y, double r, double alpha,
                           const std::optional<ScalarField>& rhs, double p,
                           const std::optional<ScalarField>& obstacle, int reference_nodes) {
  const Grid& grid = u.grid();
  const auto& dom = grid.domain();
  for (int k = 0; k < grid.dim(); ++k) {
    if (y[k] - r < dom.lo[k] - 1e-12 * grid.h() || y[k] + r > dom.hi[k] + 1e-12 * grid.h()) {
      throw MeasurementError("blow-up window leaves the domain");
    }
  }
  Domain unit{grid.dim(), {-1.0, -1.0}, {1.0, 1.0}};
  const Grid ref = build_grid(unit, {reference_nodes, reference_nodes});
  BlowupField out;
  out.base = y;
  out.radius = r;
  out.alpha = alpha;
  const double scale = std::pow(r, 1.0 + alpha);
  auto map = [&](const Point& x) {
    Point z{y[0] + r * x[0], 0.0};
    if (grid.dim() == 2) z[1] = y[1] + r * x[1];
    return z;
  };
  const double uy = interpolate(u, y);
  out.u = ScalarField::sample(ref, [&](const Point& x) { return (interpolate(u, map(x)) - uy) / scale; });
  if (obstacle) {
    const double py = interpolate(*obstacle, y);
    out.obstacle = ScalarField::sample(
        ref, [&](const Point& x) { return (interpolate(*obstacle, map(x)) - py) / scale; });
  }
  if (rhs) {
    const double factor = std::pow(r, 1.0 - alpha * (p - 1.0));
    out.rhs = ScalarField::sample(ref, [&](const Point& x) { return factor * interpolate(*rhs, map(x)); });
  }
  const Point origin{0.0, 0.0};
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (distance(ref.coords(i), origin) <= 0.5) {
      out.half_ball_max = std::max(out.half_ball_max, std::abs(out.u[i]));
    }
  }
  return out;
}

double parabolic_growth_sup(const ParabolicSolution& solution, std::size_t slice,
                            std::size_t center_node, double r, double p, const Vec& gradient) {
  if (slice >= solution.slices.size()) throw MeasurementError("slice index out of range");
  const double q = p / (p - 1.0);
  const double s = solution.times[slice];
  const double t_min = s - std::pow(r, q);
  if (t_min < solution.times.front()) {
    std::ostringstream os;
    os << "cylinder of radius " << r << " starts before the computed slab (t = " << t_min << ")";
    throw MeasurementError(os.str());
  }
  const ScalarField& now = solution.slices[slice];
  const Grid& grid = now.grid();
  const Point y = grid.coords(center_node);
  if (!ball_inside_domain(grid, y, r)) throw MeasurementError("cylinder leaves the domain");
  const double uy = now[center_node];
  const auto ball = nodes_in_ball(grid, y, r).indices();
  double sup = 0.0;
  for (std::size_t k = 0; k <= slice; ++k) {
    if (!(solution.times[k] > t_min)) continue;
    const ScalarField& f = solution.slices[k];
    for (std::size_t i : ball) {
      const Point x = grid.coords(i);
      const double tangent = uy + (x[0] - y[0]) * gradient[0] + (x[1] - y[1]) * gradient[1];
      sup = std::max(sup, std::abs(f[i] - tangent));
    }
  }
  return sup;
}

}  // namespace plap
