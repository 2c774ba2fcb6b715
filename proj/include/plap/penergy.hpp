#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "plap/mesh.hpp"

namespace plap {

/// Evaluates |g|^p / p and the flux factor |g|^(p-2) from the squared norm
/// |g|^2, with fast paths for the exponents used most often.
class PowerLaw {
 public:
  explicit PowerLaw(double p);

  double p() const { return p_; }

  /// |g|^(p-2); zero when g = 0 (the flux |g|^(p-2) g vanishes there for every p > 1).
  double flux_factor(double g2) const {
    if (g2 <= 0.0) return 0.0;
    switch (kind_) {
      case Kind::Two: return 1.0;
      case Kind::Three: return std::sqrt(g2);
      case Kind::Four: return g2;
      case Kind::ThreeHalves: return 1.0 / std::sqrt(std::sqrt(g2));
      case Kind::General: break;
    }
    return std::pow(g2, half_pm2_);
  }

  /// |g|^p / p.
  double energy_density(double g2) const {
    if (g2 <= 0.0) return 0.0;
    return g2 * flux_factor(g2) / p_;
  }

  /// d/ds of |a + s b|^(p-2) (a + s b) . b expressed through g = a + s b:
  /// |g|^(p-2) |b|^2 + (p-2) |g|^(p-4) (g.b)^2. Infinite for p < 2 at g = 0.
  double flux_slope(double g2, double gb, double b2) const {
    if (g2 <= 0.0) {
      if (p_ == 2.0) return b2;
      return p_ > 2.0 ? 0.0 : HUGE_VAL;
    }
    const double f = flux_factor(g2);
    return f * b2 + (p_ - 2.0) * f / g2 * gb * gb;
  }

 private:
  enum class Kind { Two, Three, Four, ThreeHalves, General };
  double p_;
  double half_pm2_;
  Kind kind_;
};

/// Piecewise-linear element on the structured grid: an interval in 1D, a
/// triangle in 2D (each cell is cut along its lower-left to upper-right
/// diagonal).
struct Element {
  std::array<std::uint32_t, 3> nodes{};
  /// Constant gradients of the nodal hat functions on this element.
  std::array<Vec, 3> shape_gradients{};
  double volume = 0.0;
  int vertex_count = 0;
};

struct Incidence {
  std::uint32_t element;
  std::uint8_t local;
};

class ElementMesh {
 public:
  explicit ElementMesh(const Grid& grid);

  const Grid& grid() const { return grid_; }
  const std::vector<Element>& elements() const { return elements_; }
  /// Nodal quadrature weights (one vertex share of each incident element).
  const std::vector<double>& lumped_weights() const { return weights_; }
  std::span<const Incidence> incident(std::size_t node) const {
    return {incidence_.data() + offsets_[node], incidence_.data() + offsets_[node + 1]};
  }

  /// Constant gradient of the piecewise-linear interpolant of `values` on element `e`.
  Vec element_gradient(const Element& e, std::span<const double> values) const {
    Vec g{0.0, 0.0};
    for (int k = 0; k < e.vertex_count; ++k) {
      const double v = values[e.nodes[k]];
      g[0] += v * e.shape_gradients[k][0];
      g[1] += v * e.shape_gradients[k][1];
    }
    return g;
  }

 private:
  Grid grid_;
  std::vector<Element> elements_;
  std::vector<double> weights_;
  std::vector<std::size_t> offsets_;
  std::vector<Incidence> incidence_;
};

/// Exponent, inhomogeneity and quadrature weights of the energy
/// sum_T |grad v|^p/p vol(T) + sum_i f_i v_i w_i.
struct EnergyParams {
  double p = 2.0;
  ScalarField rhs;
  std::vector<double> lumped_weights;
  std::shared_ptr<const ElementMesh> mesh;
};

/// Throws ConfigError for p <= 1 or a rhs on a different grid.
EnergyParams make_energy_params(const Grid& grid, double p, ScalarField rhs);
EnergyParams make_energy_params(std::shared_ptr<const ElementMesh> mesh, double p,
                                ScalarField rhs);

double dirichlet_energy(const ElementMesh& mesh, std::span<const double> v, double p);
double dirichlet_energy(const ScalarField& v, double p);

/// Gradient of the Dirichlet part only, written into `out`.
void dirichlet_gradient(const ElementMesh& mesh, std::span<const double> v, double p,
                        std::span<double> out);

double total_energy(const ScalarField& v, const EnergyParams& params);
ScalarField energy_gradient(const ScalarField& v, const EnergyParams& params);

/// -(gradient of the Dirichlet part)_i / w_i; approximates div(|grad v|^(p-2) grad v).
/// Values on boundary nodes are reported but carry no meaning.
ScalarField discrete_p_laplacian(const ScalarField& v, double p);
ScalarField discrete_p_laplacian(const ElementMesh& mesh, const ScalarField& v, double p);

/// max over nodes outside `boundary_mask` of |min(g_i, u_i - phi_i)| with g
/// the energy gradient. Throws InfeasibleError when u < phi - feasibility_tol.
/// Without an obstacle the residual is max |g_i|.
double complementarity_residual(const ScalarField& u, const std::optional<ScalarField>& obstacle,
                                const EnergyParams& params, const NodeSet& boundary_mask,
                                double feasibility_tol = 1e-12);

}  // namespace plap
