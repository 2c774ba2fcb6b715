#pragma once

#include <optional>
#include <vector>

#include "plap/mesh.hpp"
#include "plap/penergy.hpp"

namespace plap {

enum class SweepOrder {
  lexicographic,
  /// Colored sweep. The triangulation couples (i,j) with (i+1,j+1), so the
  /// colors are (i + j) mod 3 in 2D and parity in 1D.
  red_black,
};

enum class SeedField { obstacle, boundary_extension, given };

struct SolverConfig {
  /// Complementarity residual target; <= 0 selects 1e-9 (1 + max|f| + |J(e)|)
  /// with e the boundary extension lifted onto the obstacle.
  double outer_tol = 0.0;
  int max_sweeps = 100000;
  /// Relative width at which a per-node root search stops.
  double node_tol = 1e-13;
  SweepOrder sweep_order = SweepOrder::lexicographic;
  SeedField seed_field = SeedField::boundary_extension;
  /// Initial iterate for SeedField::given (projected onto the feasible set).
  std::optional<ScalarField> seed;
  /// Over-relaxation factor in [1, 2). A relaxed step is kept only when it
  /// does not raise the node energy, so every sweep stays energy-monotone.
  double relaxation = 1.0;
  /// Sweeps between residual evaluations.
  int check_interval = 1;
  /// Record the total energy after every sweep.
  bool record_energy = false;
};

struct EllipticProblem {
  Grid grid;
  double p = 2.0;
  /// Absent means no constraint (phi = -infinity).
  std::optional<ScalarField> obstacle;
  ScalarField rhs;
  /// Dirichlet values; only entries on `boundary_mask` are used.
  ScalarField boundary_values;
  NodeSet boundary_mask;
};

/// Builds a problem with the grid boundary as Dirichlet set and validates it.
EllipticProblem make_elliptic_problem(const Grid& grid, double p, std::optional<ScalarField> obstacle,
                                      ScalarField rhs, ScalarField boundary_values);

/// Throws ConfigError when p <= 1, fields disagree on the grid, or g < phi on
/// a boundary node.
void validate(const EllipticProblem& problem);

struct EllipticSolution {
  ScalarField u;
  /// Nodes whose last coordinate minimization was stopped by the obstacle.
  NodeSet active;
  int sweeps_used = 0;
  std::vector<double> residual_history;
  /// Total energy of the seed followed by one entry per sweep (when recorded).
  std::vector<double> energy_history;
  bool converged = false;
  double outer_tol = 0.0;
};

struct NodeUpdate {
  double value = 0.0;
  /// True iff the unconstrained scalar minimizer lies at or below the obstacle.
  bool bound = false;
};

/// Minimizes the energy over u_i in [phi_i, inf) with every other value frozen.
NodeUpdate node_minimize(const ScalarField& u, std::size_t node, const EllipticProblem& problem,
                         double node_tol = 1e-13);

EllipticSolution solve_obstacle(const EllipticProblem& problem, const SolverConfig& config = {});

struct KktReport {
  double feasibility = 0.0;    ///< max (phi - u)_+
  double supersolution = 0.0;  ///< max (-g_i)_+ over interior nodes
  double stationarity = 0.0;   ///< max |g_i| over inactive interior nodes
  double tol = 0.0;
  bool passed = false;
};

KktReport verify_kkt(const EllipticSolution& solution, const EllipticProblem& problem, double tol);

/// Transfinite (Coons) extension of the boundary values of `field` into the
/// box; linear in 1D. Reproduces affine and bilinear data exactly.
ScalarField boundary_extension(const ScalarField& field);

/// Energy parameters of an elliptic problem (shares the element mesh).
EnergyParams energy_params(const EllipticProblem& problem);

}  // namespace plap
