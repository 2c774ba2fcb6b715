#include "plap/parabolic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "plap/detail/coordinate_descent.hpp"
#include "plap/errors.hpp"

namespace plap {

namespace {

// Reuses one element mesh and node stencil for every step of a run.
class ImplicitStepper {
 public:
  explicit ImplicitStepper(const ParabolicProblem& problem) : problem_(problem) {
    bp_.mesh = std::make_shared<const ElementMesh>(problem.grid);
    bp_.p = problem.p;
    const std::size_t n = problem.grid.size();
    bp_.lower.assign(n, -std::numeric_limits<double>::infinity());
    bp_.linear.assign(n, 0.0);
    bp_.mass.assign(n, 0.0);
    bp_.fixed = problem.boundary_mask.mask();
    cd_.emplace(bp_);
  }

  StepResult step(const ScalarField& u_prev, double t_next, double dt, const SolverConfig& config) {
    if (!(dt > 0.0)) throw ConfigError("time step must be positive");
    const Grid& grid = problem_.grid;
    const std::size_t n = grid.size();
    const auto& w = bp_.mesh->lumped_weights();
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Point x = grid.coords(i);
      bp_.lower[i] = problem_.obstacle ? (*problem_.obstacle)(x, t_next)
                                       : -std::numeric_limits<double>::infinity();
      bp_.mass[i] = w[i] / dt;
      bp_.linear[i] = -u_prev[i] * w[i] / dt;
      if (bp_.fixed[i]) {
        u[i] = problem_.lateral_boundary(x, t_next);
        if (u[i] < bp_.lower[i]) {
          std::ostringstream os;
          os << "lateral datum below the obstacle at node " << i << ", t = " << t_next;
          throw ConfigError(os.str());
        }
      } else {
        u[i] = std::max(u_prev[i], bp_.lower[i]);
      }
    }
    if (config.seed_field == SeedField::given && config.seed) {
      for (std::size_t i = 0; i < n; ++i)
        if (!bp_.fixed[i]) u[i] = std::max((*config.seed)[i], bp_.lower[i]);
    }
    const double tol = config.outer_tol > 0.0 ? config.outer_tol : cd_->default_tolerance(u);
    const detail::DescentResult run = cd_->run(u, config, tol);

    StepResult out;
    out.slice = ScalarField(grid, std::move(u));
    out.active = NodeSet(grid);
    for (std::size_t i = 0; i < n; ++i)
      if (run.active[i]) out.active.insert(i);
    out.residual = run.residuals.empty() ? 0.0 : run.residuals.back();
    out.tol = run.tol;
    out.sweeps = run.sweeps;
    out.converged = run.converged;
    return out;
  }

 private:
  const ParabolicProblem& problem_;
  detail::BoundProblem bp_;
  std::optional<detail::CoordinateDescent> cd_;
};

}  // namespace

ParabolicProblem make_parabolic_problem(const Grid& grid, double p,
                                        std::optional<SpaceTimeFunction> obstacle,
                                        SpaceTimeFunction lateral_boundary, ScalarField initial,
                                        double horizon) {
  ParabolicProblem problem;
  problem.grid = grid;
  problem.p = p;
  problem.obstacle = std::move(obstacle);
  problem.lateral_boundary = std::move(lateral_boundary);
  problem.initial = std::move(initial);
  problem.horizon = horizon;
  problem.boundary_mask = boundary_nodes(grid);
  return problem;
}

TimeGrid make_time_grid(double horizon, double dt) {
  if (!(horizon > 0.0) || !(dt > 0.0)) throw ConfigError("horizon and dt must be positive");
  TimeGrid tg;
  tg.steps = static_cast<int>(std::ceil(horizon / dt - 1e-9));
  tg.steps = std::max(tg.steps, 1);
  tg.dt = horizon / tg.steps;
  return tg;
}

void validate(const ParabolicProblem& problem, const TimeGrid& timegrid) {
  if (!(problem.p > 1.0) || !std::isfinite(problem.p)) throw ConfigError("p must exceed 1");
  if (!(problem.initial.grid() == problem.grid)) {
    throw ConfigError("initial datum lives on a different grid");
  }
  if (!problem.initial.all_finite()) throw ConfigError("initial datum has non-finite values");
  if (!problem.lateral_boundary) throw ConfigError("lateral boundary datum missing");
  if (!(timegrid.dt > 0.0) || timegrid.steps < 1) throw ConfigError("invalid time grid");
  if (!problem.obstacle) return;
  const Grid& grid = problem.grid;
  const auto& phi = *problem.obstacle;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Point x = grid.coords(i);
    if (problem.initial[i] < phi(x, 0.0)) {
      std::ostringstream os;
      os << "initial datum below the obstacle at node " << i;
      throw ConfigError(os.str());
    }
    if (!problem.boundary_mask.contains(i)) continue;
    for (int k = 0; k <= timegrid.steps; ++k) {
      const double t = timegrid.time(k);
      if (problem.lateral_boundary(x, t) < phi(x, t)) {
        std::ostringstream os;
        os << "lateral datum below the obstacle at node " << i << ", t = " << t;
        throw ConfigError(os.str());
      }
    }
  }
}

StepResult step_implicit(const ScalarField& u_prev, double t_next, double dt,
                         const ParabolicProblem& problem, const SolverConfig& config) {
  ImplicitStepper stepper(problem);
  return stepper.step(u_prev, t_next, dt, config);
}

ParabolicSolution solve_parabolic(const ParabolicProblem& problem, const TimeGrid& timegrid,
                                  const SolverConfig& config) {
  validate(problem, timegrid);
  ImplicitStepper stepper(problem);
  ParabolicSolution sol;
  sol.times.push_back(0.0);
  sol.slices.push_back(problem.initial);
  NodeSet initial_active(problem.grid);
  if (problem.obstacle) {
    for (std::size_t i = 0; i < problem.grid.size(); ++i) {
      if (!problem.boundary_mask.contains(i) &&
          problem.initial[i] <= (*problem.obstacle)(problem.grid.coords(i), 0.0)) {
        initial_active.insert(i);
      }
    }
  }
  sol.active_sets.push_back(initial_active);
  sol.residuals.push_back(0.0);
  sol.sweeps.push_back(0);
  SolverConfig step_config = config;
  step_config.seed_field = SeedField::obstacle;
  step_config.seed.reset();
  for (int k = 1; k <= timegrid.steps; ++k) {
    const double t = timegrid.time(k);
    StepResult step = stepper.step(sol.slices.back(), t, timegrid.dt, step_config);
    sol.times.push_back(t);
    sol.slices.push_back(std::move(step.slice));
    sol.active_sets.push_back(std::move(step.active));
    sol.residuals.push_back(step.residual);
    sol.sweeps.push_back(step.sweeps);
    if (!step.converged) {
      sol.failure_index = k;
      return sol;
    }
  }
  sol.completed = true;
  return sol;
}

LipschitzReport time_lipschitz_constant(const ParabolicSolution& solution,
                                        const ParabolicProblem& problem, const TimeGrid& timegrid,
                                        double tol) {
  if (solution.slices.size() < 2) throw MeasurementError("need at least two time slices");
  LipschitzReport rep;
  const Grid& grid = problem.grid;
  for (std::size_t k = 0; k + 1 < solution.slices.size(); ++k) {
    const double dt = solution.times[k + 1] - solution.times[k];
    const auto& a = solution.slices[k];
    const auto& b = solution.slices[k + 1];
    for (std::size_t i = 0; i < a.size(); ++i) {
      rep.measured = std::max(rep.measured, std::abs(b[i] - a[i]) / dt);
    }
  }
  for (int k = 0; k < timegrid.steps; ++k) {
    const double t0 = timegrid.time(k);
    const double t1 = timegrid.time(k + 1);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Point x = grid.coords(i);
      if (problem.obstacle) {
        const auto& phi = *problem.obstacle;
        rep.obstacle_rate = std::max(rep.obstacle_rate, std::abs(phi(x, t1) - phi(x, t0)) / timegrid.dt);
      }
      if (problem.boundary_mask.contains(i)) {
        const auto& f = problem.lateral_boundary;
        rep.boundary_rate = std::max(rep.boundary_rate, std::abs(f(x, t1) - f(x, t0)) / timegrid.dt);
      }
    }
  }
  const ScalarField lap = discrete_p_laplacian(problem.initial, problem.p);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!problem.boundary_mask.contains(i)) {
      rep.initial_p_laplacian = std::max(rep.initial_p_laplacian, std::abs(lap[i]));
    }
  }
  rep.bound = std::max({rep.obstacle_rate, rep.boundary_rate, rep.initial_p_laplacian});
  rep.margin = rep.bound * (1.0 + tol) - rep.measured;
  return rep;
}

}  // namespace plap
