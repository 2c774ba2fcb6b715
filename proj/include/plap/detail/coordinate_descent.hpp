#pragma once

// Projected nonlinear Gauss-Seidel shared by the elliptic and the implicit
// parabolic solvers. The minimized functional is
//   sum_T |grad v|^p/p vol(T) + sum_i (linear_i v_i + mass_i v_i^2 / 2)
// over {v >= lower, v = given on fixed nodes}.

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "plap/elliptic.hpp"
#include "plap/penergy.hpp"

namespace plap::detail {

struct BoundProblem {
  std::shared_ptr<const ElementMesh> mesh;
  double p = 2.0;
  /// -infinity where unconstrained.
  std::vector<double> lower;
  std::vector<double> linear;
  std::vector<double> mass;
  std::vector<std::uint8_t> fixed;
};

struct DescentResult {
  std::vector<std::uint8_t> active;
  int sweeps = 0;
  std::vector<double> residuals;
  std::vector<double> energies;
  bool converged = false;
  double tol = 0.0;
};

class CoordinateDescent {
 public:
  explicit CoordinateDescent(const BoundProblem& problem);

  NodeUpdate minimize(std::span<const double> u, std::size_t node, double node_tol) const;
  double node_energy(std::span<const double> u, std::size_t node, double s) const;
  double energy(std::span<const double> u) const;
  /// Gradient of the functional (including the nodal terms).
  void gradient(std::span<const double> u, std::span<double> out) const;
  /// max over free nodes of |min(g_i, u_i - lower_i)|.
  double residual(std::span<const double> u) const;

  /// 1e-9 (1 + max |linear_i / w_i| + |energy(reference)|).
  double default_tolerance(std::span<const double> reference) const;

  /// Runs sweeps from `u` (must be feasible and carry the fixed values) until
  /// the residual drops to `tol` or the sweep budget is spent.
  DescentResult run(std::vector<double>& u, const SolverConfig& config, double tol) const;

 private:
  struct Term {
    double volume;
    Vec b;
    std::uint32_t other[2];
    Vec coef[2];
  };

  double derivative(std::span<const double> u, std::size_t node, double s, double* slope) const;

  const BoundProblem& problem_;
  PowerLaw law_;
  std::vector<std::size_t> offsets_;
  std::vector<Term> terms_;
  std::vector<std::size_t> colored_order_;
};

}  // namespace plap::detail
