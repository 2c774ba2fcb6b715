#include "plap/penergy.hpp"

#include <algorithm>
#include <sstream>

#include "plap/errors.hpp"

namespace plap {

PowerLaw::PowerLaw(double p) : p_(p), half_pm2_(0.5 * (p - 2.0)), kind_(Kind::General) {
  if (!(p > 1.0) || !std::isfinite(p)) throw ConfigError("p must exceed 1");
  if (p == 2.0) kind_ = Kind::Two;
  else if (p == 3.0) kind_ = Kind::Three;
  else if (p == 4.0) kind_ = Kind::Four;
  else if (p == 1.5) kind_ = Kind::ThreeHalves;
}

ElementMesh::ElementMesh(const Grid& grid) : grid_(grid) {
  const auto n = grid.counts();
  if (grid.dim() == 1) {
    const double h = grid.spacing()[0];
    for (int i = 0; i + 1 < n[0]; ++i) {
      Element e;
      e.vertex_count = 2;
      e.nodes = {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i + 1), 0};
      e.shape_gradients = {Vec{-1.0 / h, 0.0}, Vec{1.0 / h, 0.0}, Vec{0.0, 0.0}};
      e.volume = h;
      elements_.push_back(e);
    }
  } else {
    const double hx = grid.spacing()[0];
    const double hy = grid.spacing()[1];
    const double vol = 0.5 * hx * hy;
    for (int j = 0; j + 1 < n[1]; ++j) {
      for (int i = 0; i + 1 < n[0]; ++i) {
        const auto v00 = static_cast<std::uint32_t>(grid.index(i, j));
        const auto v10 = static_cast<std::uint32_t>(grid.index(i + 1, j));
        const auto v11 = static_cast<std::uint32_t>(grid.index(i + 1, j + 1));
        const auto v01 = static_cast<std::uint32_t>(grid.index(i, j + 1));
        // Lower-right triangle: grad = ((u10-u00)/hx, (u11-u10)/hy).
        Element a;
        a.vertex_count = 3;
        a.nodes = {v00, v10, v11};
        a.shape_gradients = {Vec{-1.0 / hx, 0.0}, Vec{1.0 / hx, -1.0 / hy}, Vec{0.0, 1.0 / hy}};
        a.volume = vol;
        elements_.push_back(a);
        // Upper-left triangle: grad = ((u11-u01)/hx, (u01-u00)/hy).
        Element b;
        b.vertex_count = 3;
        b.nodes = {v00, v11, v01};
        b.shape_gradients = {Vec{0.0, -1.0 / hy}, Vec{1.0 / hx, 0.0}, Vec{-1.0 / hx, 1.0 / hy}};
        b.volume = vol;
        elements_.push_back(b);
      }
    }
  }

  weights_.assign(grid.size(), 0.0);
  std::vector<std::size_t> degree(grid.size(), 0);
  for (const auto& e : elements_) {
    for (int k = 0; k < e.vertex_count; ++k) {
      weights_[e.nodes[k]] += e.volume / e.vertex_count;
      ++degree[e.nodes[k]];
    }
  }
  offsets_.assign(grid.size() + 1, 0);
  for (std::size_t i = 0; i < grid.size(); ++i) offsets_[i + 1] = offsets_[i] + degree[i];
  incidence_.resize(offsets_.back());
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t t = 0; t < elements_.size(); ++t) {
    const auto& e = elements_[t];
    for (int k = 0; k < e.vertex_count; ++k) {
      incidence_[fill[e.nodes[k]]++] = {static_cast<std::uint32_t>(t), static_cast<std::uint8_t>(k)};
    }
  }
}

EnergyParams make_energy_params(std::shared_ptr<const ElementMesh> mesh, double p,
                                ScalarField rhs) {
  PowerLaw check(p);
  (void)check;
  if (!(rhs.grid() == mesh->grid())) throw ConfigError("rhs lives on a different grid");
  if (!rhs.all_finite()) throw ConfigError("rhs has non-finite values");
  EnergyParams params;
  params.p = p;
  params.rhs = std::move(rhs);
  params.lumped_weights = mesh->lumped_weights();
  params.mesh = std::move(mesh);
  return params;
}

EnergyParams make_energy_params(const Grid& grid, double p, ScalarField rhs) {
  return make_energy_params(std::make_shared<const ElementMesh>(grid), p, std::move(rhs));
}

double dirichlet_energy(const ElementMesh& mesh, std::span<const double> v, double p) {
  const PowerLaw law(p);
  double sum = 0.0;
  for (const auto& e : mesh.elements()) {
    const Vec g = mesh.element_gradient(e, v);
    sum += law.energy_density(g[0] * g[0] + g[1] * g[1]) * e.volume;
  }
  return sum;
}

double dirichlet_energy(const ScalarField& v, double p) {
  const ElementMesh mesh(v.grid());
  return dirichlet_energy(mesh, v.values(), p);
}

void dirichlet_gradient(const ElementMesh& mesh, std::span<const double> v, double p,
                        std::span<double> out) {
  const PowerLaw law(p);
  std::fill(out.begin(), out.end(), 0.0);
  for (const auto& e : mesh.elements()) {
    const Vec g = mesh.element_gradient(e, v);
    const double scale = law.flux_factor(g[0] * g[0] + g[1] * g[1]) * e.volume;
    if (scale == 0.0) continue;
    for (int k = 0; k < e.vertex_count; ++k) {
      const Vec& b = e.shape_gradients[k];
      out[e.nodes[k]] += scale * (g[0] * b[0] + g[1] * b[1]);
    }
  }
}

double total_energy(const ScalarField& v, const EnergyParams& params) {
  double sum = dirichlet_energy(*params.mesh, v.values(), params.p);
  for (std::size_t i = 0; i < v.size(); ++i) {
    sum += params.rhs[i] * v[i] * params.lumped_weights[i];
  }
  return sum;
}

ScalarField energy_gradient(const ScalarField& v, const EnergyParams& params) {
  ScalarField g(v.grid());
  dirichlet_gradient(*params.mesh, v.values(), params.p, g.values());
  for (std::size_t i = 0; i < v.size(); ++i) g[i] += params.rhs[i] * params.lumped_weights[i];
  return g;
}

ScalarField discrete_p_laplacian(const ElementMesh& mesh, const ScalarField& v, double p) {
  ScalarField out(v.grid());
  dirichlet_gradient(mesh, v.values(), p, out.values());
  const auto& w = mesh.lumped_weights();
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = -out[i] / w[i];
  return out;
}

ScalarField discrete_p_laplacian(const ScalarField& v, double p) {
  const ElementMesh mesh(v.grid());
  return discrete_p_laplacian(mesh, v, p);
}

double complementarity_residual(const ScalarField& u, const std::optional<ScalarField>& obstacle,
                                const EnergyParams& params, const NodeSet& boundary_mask,
                                double feasibility_tol) {
  const ScalarField g = energy_gradient(u, params);
  double res = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (boundary_mask.contains(i)) continue;
    double r = g[i];
    if (obstacle) {
      const double gap = u[i] - (*obstacle)[i];
      if (gap < -feasibility_tol) {
        std::ostringstream os;
        os << "field lies below the obstacle at node " << i << " by " << -gap;
        throw InfeasibleError(os.str(), i);
      }
      r = std::min(r, gap);
    }
    res = std::max(res, std::abs(r));
  }
  return res;
}

}  // namespace plap
