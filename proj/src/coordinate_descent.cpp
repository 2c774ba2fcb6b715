#include "plap/detail/coordinate_descent.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "plap/errors.hpp"

namespace plap::detail {

namespace {

constexpr int kMaxTerms = 8;
constexpr int kMaxDoublings = 60;

// Frozen data of one scalar subproblem: G_t(s) = a_t + s b_t.
struct LocalProblem {
  std::array<Vec, kMaxTerms> a;
  std::array<Vec, kMaxTerms> b;
  std::array<double, kMaxTerms> vol;
  int n = 0;
  double linear = 0.0;
  double mass = 0.0;
  double lo_nb = 0.0;
  double hi_nb = 0.0;

  double derivative(const PowerLaw& law, double s, double* slope) const {
    double d = linear + mass * s;
    double ds = mass;
    for (int t = 0; t < n; ++t) {
      const double gx = a[t][0] + s * b[t][0];
      const double gy = a[t][1] + s * b[t][1];
      const double g2 = gx * gx + gy * gy;
      const double gb = gx * b[t][0] + gy * b[t][1];
      d += vol[t] * law.flux_factor(g2) * gb;
      if (slope) ds += vol[t] * law.flux_slope(g2, gb, b[t][0] * b[t][0] + b[t][1] * b[t][1]);
    }
    if (slope) *slope = ds;
    return d;
  }

  double energy(const PowerLaw& law, double s) const {
    double e = linear * s + 0.5 * mass * s * s;
    for (int t = 0; t < n; ++t) {
      const double gx = a[t][0] + s * b[t][0];
      const double gy = a[t][1] + s * b[t][1];
      e += vol[t] * law.energy_density(gx * gx + gy * gy);
    }
    return e;
  }
};

}  // namespace

CoordinateDescent::CoordinateDescent(const BoundProblem& problem)
    : problem_(problem), law_(problem.p) {
  const ElementMesh& mesh = *problem.mesh;
  const std::size_t n = mesh.grid().size();
  offsets_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    offsets_[i + 1] = offsets_[i] + mesh.incident(i).size();
  }
  terms_.reserve(offsets_.back());
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& inc : mesh.incident(i)) {
      const Element& e = mesh.elements()[inc.element];
      Term term{};
      term.volume = e.volume;
      term.b = e.shape_gradients[inc.local];
      int m = 0;
      for (int k = 0; k < e.vertex_count; ++k) {
        if (k == inc.local) continue;
        term.other[m] = e.nodes[k];
        term.coef[m] = e.shape_gradients[k];
        ++m;
      }
      if (m == 1) {
        term.other[1] = term.other[0];
        term.coef[1] = Vec{0.0, 0.0};
      }
      terms_.push_back(term);
    }
    if (offsets_[i + 1] - offsets_[i] > static_cast<std::size_t>(kMaxTerms)) {
      throw NumericalError("node stencil larger than supported");
    }
  }

  const Grid& grid = mesh.grid();
  const int colors = grid.dim() == 2 ? 3 : 2;
  for (int c = 0; c < colors; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto ij = grid.multi_index(i);
      if ((ij[0] + ij[1]) % colors == c) colored_order_.push_back(i);
    }
  }
}

NodeUpdate CoordinateDescent::minimize(std::span<const double> u, std::size_t node,
                                       double node_tol) const {
  LocalProblem lp;
  lp.linear = problem_.linear[node];
  lp.mass = problem_.mass[node];
  lp.lo_nb = std::numeric_limits<double>::infinity();
  lp.hi_nb = -std::numeric_limits<double>::infinity();
  for (std::size_t k = offsets_[node]; k < offsets_[node + 1]; ++k) {
    const Term& t = terms_[k];
    const double u0 = u[t.other[0]];
    const double u1 = u[t.other[1]];
    lp.a[lp.n] = Vec{t.coef[0][0] * u0 + t.coef[1][0] * u1, t.coef[0][1] * u0 + t.coef[1][1] * u1};
    lp.b[lp.n] = t.b;
    lp.vol[lp.n] = t.volume;
    ++lp.n;
    lp.lo_nb = std::min({lp.lo_nb, u0, u1});
    lp.hi_nb = std::max({lp.hi_nb, u0, u1});
  }
  if (lp.n == 0) throw NumericalError("node without incident elements");

  const double lower = problem_.lower[node];
  const bool bounded = std::isfinite(lower);
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  // The current value decides on which side of it the minimizer lies; the
  // obstacle is only probed when the minimizer could be below it.
  double s = u[node];
  double slope = 0.0;
  double d = lp.derivative(law_, s, &slope);
  if (bounded && s <= lower) {
    if (d >= 0.0) return {lower, true};
    lo = lower;
  } else if (d < 0.0) {
    lo = s;
  } else if (d > 0.0) {
    hi = s;
    if (bounded) {
      const double dl = lp.derivative(law_, lower, nullptr);
      if (dl >= 0.0) return {lower, true};
      lo = lower;
    }
  } else {
    return {s, false};
  }

  // Safeguarded Newton on the nondecreasing derivative. While one side of the
  // bracket is open, non-Newton moves step outward geometrically.
  const double scale = std::max({1.0, std::abs(lp.lo_nb), std::abs(lp.hi_nb)});
  const double tol = node_tol * scale;
  double step = (lp.hi_nb - lp.lo_nb) + 1.0;
  int doublings = 0;
  for (int iter = 0; iter < 400; ++iter) {
    double next = s - d / slope;
    const bool newton_ok = slope > 0.0 && std::isfinite(next) && next > lo && next < hi;
    if (!newton_ok) {
      if (std::isfinite(lo) && std::isfinite(hi)) {
        next = 0.5 * (lo + hi);
      } else {
        if (++doublings > kMaxDoublings) {
          std::ostringstream os;
          os << "root bracket expansion failed at node " << node << " (corrupted field?)";
          throw NumericalError(os.str());
        }
        next = std::isfinite(lo) ? std::max(lo, s) + step : std::min(hi, s) - step;
        step *= 2.0;
      }
    }
    const double moved = std::abs(next - s);
    s = next;
    if (moved <= tol || hi - lo <= tol) break;
    d = lp.derivative(law_, s, &slope);
    if (d == 0.0) break;
    if (d < 0.0) lo = s;
    else hi = s;
  }
  if (bounded && s <= lower) return {lower, true};
  return {s, false};
}

double CoordinateDescent::node_energy(std::span<const double> u, std::size_t node, double s) const {
  LocalProblem lp;
  lp.linear = problem_.linear[node];
  lp.mass = problem_.mass[node];
  for (std::size_t k = offsets_[node]; k < offsets_[node + 1]; ++k) {
    const Term& t = terms_[k];
    const double u0 = u[t.other[0]];
    const double u1 = u[t.other[1]];
    lp.a[lp.n] = Vec{t.coef[0][0] * u0 + t.coef[1][0] * u1, t.coef[0][1] * u0 + t.coef[1][1] * u1};
    lp.b[lp.n] = t.b;
    lp.vol[lp.n] = t.volume;
    ++lp.n;
  }
  return lp.energy(law_, s);
}

double CoordinateDescent::energy(std::span<const double> u) const {
  double e = dirichlet_energy(*problem_.mesh, u, problem_.p);
  for (std::size_t i = 0; i < u.size(); ++i) {
    e += problem_.linear[i] * u[i] + 0.5 * problem_.mass[i] * u[i] * u[i];
  }
  return e;
}

void CoordinateDescent::gradient(std::span<const double> u, std::span<double> out) const {
  dirichlet_gradient(*problem_.mesh, u, problem_.p, out);
  for (std::size_t i = 0; i < u.size(); ++i) {
    out[i] += problem_.linear[i] + problem_.mass[i] * u[i];
  }
}

double CoordinateDescent::residual(std::span<const double> u) const {
  std::vector<double> g(u.size());
  gradient(u, g);
  double res = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (problem_.fixed[i]) continue;
    double r = g[i];
    if (std::isfinite(problem_.lower[i])) r = std::min(r, u[i] - problem_.lower[i]);
    res = std::max(res, std::abs(r));
  }
  return res;
}

double CoordinateDescent::default_tolerance(std::span<const double> reference) const {
  double fmax = 0.0;
  const auto& w = problem_.mesh->lumped_weights();
  for (std::size_t i = 0; i < reference.size(); ++i) {
    fmax = std::max(fmax, std::abs(problem_.linear[i] / w[i]));
  }
  return 1e-9 * (1.0 + fmax + std::abs(energy(reference)));
}

DescentResult CoordinateDescent::run(std::vector<double>& u, const SolverConfig& config,
                                     double tol) const {
  if (config.max_sweeps < 1) throw ConfigError("max_sweeps must be at least 1");
  if (!(config.node_tol > 0.0)) throw ConfigError("node_tol must be positive");
  if (config.relaxation < 1.0 || config.relaxation >= 2.0) {
    throw ConfigError("relaxation must lie in [1, 2)");
  }
  const std::size_t n = u.size();
  DescentResult out;
  out.active.assign(n, 0);

  const double seed_energy = energy(u);
  out.tol = tol;
  if (config.record_energy) out.energies.push_back(seed_energy);

  std::vector<std::size_t> lexicographic;
  const std::vector<std::size_t>* order = &colored_order_;
  if (config.sweep_order == SweepOrder::lexicographic) {
    lexicographic.resize(n);
    for (std::size_t i = 0; i < n; ++i) lexicographic[i] = i;
    order = &lexicographic;
  }
  const int interval = std::max(1, config.check_interval);
  const double omega = config.relaxation;

  for (int sweep = 1; sweep <= config.max_sweeps; ++sweep) {
    for (std::size_t i : *order) {
      if (problem_.fixed[i]) continue;
      const NodeUpdate upd = minimize(u, i, config.node_tol);
      double next = upd.value;
      if (omega != 1.0 && next != u[i]) {
        const double relaxed = std::max(problem_.lower[i], u[i] + omega * (next - u[i]));
        if (node_energy(u, i, relaxed) <= node_energy(u, i, u[i])) next = relaxed;
      }
      u[i] = next;
      out.active[i] = upd.bound ? 1 : 0;
    }
    out.sweeps = sweep;
    if (config.record_energy) out.energies.push_back(energy(u));
    if (sweep % interval == 0 || sweep == config.max_sweeps) {
      const double r = residual(u);
      out.residuals.push_back(r);
      if (r <= out.tol) {
        out.converged = true;
        break;
      }
    }
  }
  return out;
}

}  // namespace plap::detail
