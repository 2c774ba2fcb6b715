#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "plap/elliptic.hpp"
#include "plap/mesh.hpp"

namespace plap {

using SpaceTimeFunction = std::function<double(const Point&, double)>;

/// Homogeneous p-parabolic obstacle problem: max(Delta_p u - u_t, u - phi) = 0
/// with lateral Dirichlet data and an initial datum.
struct ParabolicProblem {
  Grid grid;
  double p = 2.0;
  /// Absent means no constraint.
  std::optional<SpaceTimeFunction> obstacle;
  SpaceTimeFunction lateral_boundary;
  ScalarField initial;
  double horizon = 1.0;
  NodeSet boundary_mask;
};

ParabolicProblem make_parabolic_problem(const Grid& grid, double p,
                                        std::optional<SpaceTimeFunction> obstacle,
                                        SpaceTimeFunction lateral_boundary, ScalarField initial,
                                        double horizon);

struct TimeGrid {
  double dt = 0.0;
  int steps = 0;
  double time(int k) const { return k * dt; }
};

/// Uses ceil(T / dt) steps and shrinks dt so that steps * dt = T.
TimeGrid make_time_grid(double horizon, double dt);

/// Throws ConfigError when p <= 1, the initial datum lies below phi(., 0), or
/// the lateral datum lies below the obstacle at a sampled time.
void validate(const ParabolicProblem& problem, const TimeGrid& timegrid);

struct StepResult {
  ScalarField slice;
  NodeSet active;
  double residual = 0.0;
  double tol = 0.0;
  int sweeps = 0;
  bool converged = false;
};

/// One backward-Euler step: minimizes
///   int |grad v|^p/p + v^2/(2 dt) - u_prev v / dt
/// over v >= phi(., t_next) with v = lateral datum at t_next on the boundary.
StepResult step_implicit(const ScalarField& u_prev, double t_next, double dt,
                         const ParabolicProblem& problem, const SolverConfig& config = {});

struct ParabolicSolution {
  std::vector<double> times;
  /// slices[0] is the initial datum.
  std::vector<ScalarField> slices;
  std::vector<NodeSet> active_sets;
  std::vector<double> residuals;
  std::vector<int> sweeps;
  bool completed = false;
  /// Index of the first step whose inner solve did not converge, or -1.
  int failure_index = -1;
};

ParabolicSolution solve_parabolic(const ParabolicProblem& problem, const TimeGrid& timegrid,
                                  const SolverConfig& config = {});

struct LipschitzReport {
  /// max_k || u^{k+1} - u^k ||_inf / dt
  double measured = 0.0;
  /// N = max(|phi_t|, |f_t|, |Delta_p g|), each sampled on the grids.
  double bound = 0.0;
  double margin = 0.0;
  double obstacle_rate = 0.0;
  double boundary_rate = 0.0;
  double initial_p_laplacian = 0.0;
};

/// margin = bound (1 + tol) - measured.
LipschitzReport time_lipschitz_constant(const ParabolicSolution& solution,
                                        const ParabolicProblem& problem, const TimeGrid& timegrid,
                                        double tol = 0.05);

}  // namespace plap
