#include "plap/elliptic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "plap/detail/coordinate_descent.hpp"
#include "plap/errors.hpp"

namespace plap {

namespace {

detail::BoundProblem bound_problem(const EllipticProblem& problem,
                                   std::shared_ptr<const ElementMesh> mesh) {
  detail::BoundProblem bp;
  bp.mesh = std::move(mesh);
  bp.p = problem.p;
  const std::size_t n = problem.grid.size();
  const auto& w = bp.mesh->lumped_weights();
  bp.lower.assign(n, -std::numeric_limits<double>::infinity());
  if (problem.obstacle) bp.lower = problem.obstacle->values();
  bp.linear.resize(n);
  for (std::size_t i = 0; i < n; ++i) bp.linear[i] = problem.rhs[i] * w[i];
  bp.mass.assign(n, 0.0);
  bp.fixed = problem.boundary_mask.mask();
  return bp;
}

}  // namespace

EllipticProblem make_elliptic_problem(const Grid& grid, double p, std::optional<ScalarField> obstacle,
                                      ScalarField rhs, ScalarField boundary_values) {
  EllipticProblem problem;
  problem.grid = grid;
  problem.p = p;
  problem.obstacle = std::move(obstacle);
  problem.rhs = std::move(rhs);
  problem.boundary_values = std::move(boundary_values);
  problem.boundary_mask = boundary_nodes(grid);
  validate(problem);
  return problem;
}

void validate(const EllipticProblem& problem) {
  if (!(problem.p > 1.0) || !std::isfinite(problem.p)) throw ConfigError("p must exceed 1");
  const Grid& grid = problem.grid;
  if (!(problem.rhs.grid() == grid)) throw ConfigError("rhs lives on a different grid");
  if (!(problem.boundary_values.grid() == grid)) {
    throw ConfigError("boundary values live on a different grid");
  }
  if (problem.boundary_mask.mask().size() != grid.size()) {
    throw ConfigError("boundary mask does not match the grid");
  }
  if (!problem.rhs.all_finite()) throw ConfigError("rhs has non-finite values");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (problem.boundary_mask.contains(i) && !std::isfinite(problem.boundary_values[i])) {
      throw ConfigError("boundary values must be finite");
    }
  }
  if (!problem.obstacle) return;
  const ScalarField& phi = *problem.obstacle;
  if (!(phi.grid() == grid)) throw ConfigError("obstacle lives on a different grid");
  if (!phi.all_finite()) throw ConfigError("obstacle has non-finite values");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (problem.boundary_mask.contains(i) && problem.boundary_values[i] < phi[i]) {
      std::ostringstream os;
      os << "boundary data lies below the obstacle at node " << i << " (g = "
         << problem.boundary_values[i] << ", phi = " << phi[i] << ")";
      throw ConfigError(os.str());
    }
  }
}

EnergyParams energy_params(const EllipticProblem& problem) {
  return make_energy_params(problem.grid, problem.p, problem.rhs);
}

ScalarField boundary_extension(const ScalarField& field) {
  const Grid& grid = field.grid();
  const auto n = grid.counts();
  ScalarField out(grid);
  if (grid.dim() == 1) {
    const double a = field[0];
    const double b = field[n[0] - 1];
    for (int i = 0; i < n[0]; ++i) {
      const double s = static_cast<double>(i) / (n[0] - 1);
      out[i] = (1 - s) * a + s * b;
    }
    return out;
  }
  auto at = [&](int i, int j) { return field[grid.index(i, j)]; };
  const int ni = n[0] - 1;
  const int nj = n[1] - 1;
  for (int j = 0; j <= nj; ++j) {
    const double t = static_cast<double>(j) / nj;
    for (int i = 0; i <= ni; ++i) {
      const double s = static_cast<double>(i) / ni;
      const double edges = (1 - s) * at(0, j) + s * at(ni, j) + (1 - t) * at(i, 0) + t * at(i, nj);
      const double corners = (1 - s) * (1 - t) * at(0, 0) + s * (1 - t) * at(ni, 0) +
                             (1 - s) * t * at(0, nj) + s * t * at(ni, nj);
      out[grid.index(i, j)] = edges - corners;
    }
  }
  return out;
}

NodeUpdate node_minimize(const ScalarField& u, std::size_t node, const EllipticProblem& problem,
                         double node_tol) {
  if (problem.boundary_mask.contains(node)) {
    throw ConfigError("node_minimize requires an interior node");
  }
  const auto bp = bound_problem(problem, std::make_shared<const ElementMesh>(problem.grid));
  const detail::CoordinateDescent cd(bp);
  return cd.minimize(u.values(), node, node_tol);
}

EllipticSolution solve_obstacle(const EllipticProblem& problem, const SolverConfig& config) {
  validate(problem);
  const auto bp = bound_problem(problem, std::make_shared<const ElementMesh>(problem.grid));
  const detail::CoordinateDescent cd(bp);
  const Grid& grid = problem.grid;
  const std::size_t n = grid.size();

  std::vector<double> u(n);
  switch (config.seed_field) {
    case SeedField::obstacle:
      if (problem.obstacle) {
        u = problem.obstacle->values();
        break;
      }
      [[fallthrough]];
    case SeedField::boundary_extension:
      u = boundary_extension(problem.boundary_values).values();
      break;
    case SeedField::given:
      if (!config.seed || !(config.seed->grid() == grid)) {
        throw ConfigError("seed_field = given requires a seed on the problem grid");
      }
      u = config.seed->values();
      break;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (problem.boundary_mask.contains(i)) u[i] = problem.boundary_values[i];
    else u[i] = std::max(u[i], bp.lower[i]);
  }

  double tol = config.outer_tol;
  if (!(tol > 0.0)) {
    std::vector<double> reference = boundary_extension(problem.boundary_values).values();
    for (std::size_t i = 0; i < n; ++i) {
      if (!problem.boundary_mask.contains(i)) reference[i] = std::max(reference[i], bp.lower[i]);
    }
    tol = cd.default_tolerance(reference);
  }
  const detail::DescentResult run = cd.run(u, config, tol);

  EllipticSolution sol;
  sol.u = ScalarField(grid, std::move(u));
  sol.active = NodeSet(grid);
  for (std::size_t i = 0; i < n; ++i)
    if (run.active[i]) sol.active.insert(i);
  sol.sweeps_used = run.sweeps;
  sol.residual_history = run.residuals;
  sol.energy_history = run.energies;
  sol.converged = run.converged;
  sol.outer_tol = run.tol;
  return sol;
}

KktReport verify_kkt(const EllipticSolution& solution, const EllipticProblem& problem, double tol) {
  const EnergyParams params = energy_params(problem);
  const ScalarField g = energy_gradient(solution.u, params);
  KktReport rep;
  rep.tol = tol;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (problem.obstacle) {
      rep.feasibility = std::max(rep.feasibility, (*problem.obstacle)[i] - solution.u[i]);
    }
    if (problem.boundary_mask.contains(i)) continue;
    rep.supersolution = std::max(rep.supersolution, -g[i]);
    if (!solution.active.contains(i)) rep.stationarity = std::max(rep.stationarity, std::abs(g[i]));
  }
  rep.feasibility = std::max(rep.feasibility, 0.0);
  rep.supersolution = std::max(rep.supersolution, 0.0);
  rep.passed = rep.feasibility <= tol && rep.supersolution <= tol && rep.stationarity <= tol;
  return rep;
}

}  // namespace plap
