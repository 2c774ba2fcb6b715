#include "plap/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "plap/errors.hpp"
#include "plap/penergy.hpp"

namespace plap {

namespace {

double param_or(const std::map<std::string, double>& params, const std::string& key, double fallback) {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

double norm(const Point& x, int dim) { return dim == 1 ? std::abs(x[0]) : std::hypot(x[0], x[1]); }

void require_dim(int dim) {
  if (dim != 1 && dim != 2) throw ConfigError("oracle dimension must be 1 or 2");
}

void require_p_above_two(const std::string& name, double p) {
  if (!(p > 2.0)) {
    std::ostringstream os;
    os << name << " requires p > 2 (got " << p << ")";
    throw ConfigError(os.str());
  }
}

Domain unit_box(int dim, double lo = -1.0, double hi = 1.0) {
  return Domain{dim, {lo, dim == 2 ? lo : 0.0}, {hi, dim == 2 ? hi : 0.0}};
}

// (p-1)/p: amplitude c with Delta_p(c x_+^q) = (c q)^(p-1) = 1 = u_t.
double halfspace_amplitude(double p) { return (p - 1.0) / p; }

// c with c/(p-2) = (c k)^(p-1) (k + n), k = p/(p-2).
double source_type_constant(double p, int n) {
  const double k = p / (p - 2.0);
  return std::pow((p - 2.0) * std::pow(k, p - 1.0) * (k + n), 1.0 / (2.0 - p));
}

// A with A^(p-2) m^(p-1) = c, m = (p-1)/(p-2).
double traveling_wave_amplitude(double p, double speed) {
  const double m = (p - 1.0) / (p - 2.0);
  return std::pow(speed, 1.0 / (p - 2.0)) * std::pow((p - 2.0) / (p - 1.0), m);
}

// gamma with (m gamma q)^(p-1) = 1/lambda.
double barenblatt_gamma(double p, int n) {
  const double lambda = n * (p - 2.0) + p;
  return (p - 2.0) / p * std::pow(lambda, -1.0 / (p - 1.0));
}

}  // namespace

ExactSolution catalog(const std::string& name, double p, int dim,
                      const std::map<std::string, double>& params, std::optional<double> constant) {
  require_dim(dim);
  if (!(p > 1.0) || !std::isfinite(p)) throw ConfigError("p must exceed 1");
  ExactSolution ex;
  ex.name = name;
  ex.dim = dim;
  ex.p = p;
  ex.params = params;
  const double q = p / (p - 1.0);

  if (name == "elliptic_halfspace") {
    const double a = param_or(params, "a", 0.0);
    const double f = std::pow(q, p - 1.0);
    ex.kind = SolutionKind::elliptic;
    ex.constant_name = "amplitude";
    ex.audited_constant = 1.0;
    ex.constant = constant.value_or(1.0);
    const double amp = ex.constant;
    ex.evaluate = [=](const Point& x, double) {
      const double s = x[0] - a;
      return s > 0.0 ? amp * std::pow(s, q) : 0.0;
    };
    ex.time_derivative = [](const Point&, double) { return 0.0; };
    ex.rhs = [=](const Point&) { return f; };
    ex.valid = [=](const Point& x, double, double margin) { return x[0] - a > margin; };
    ex.sample_time = 0.0;
    ex.scan_margin = 0.25;
    ex.scan_domain = unit_box(dim);
  } else if (name == "parabolic_halfspace") {
    ex.constant_name = "c_p";
    ex.printed_constant = std::pow(p / (p - 1.0), p - 1.0);
    ex.audited_constant = halfspace_amplitude(p);
    ex.constant = constant.value_or(*ex.audited_constant);
    const double c = ex.constant;
    ex.evaluate = [=](const Point& x, double t) {
      return (x[0] > 0.0 ? c * std::pow(x[0], q) : 0.0) + t;
    };
    ex.time_derivative = [](const Point&, double) { return 1.0; };
    ex.valid = [](const Point& x, double, double margin) { return x[0] > margin; };
    ex.sample_time = 0.5;
    ex.scan_margin = 0.25;
    ex.scan_domain = unit_box(dim);
  } else if (name == "source_type") {
    require_p_above_two(name, p);
    const double k = p / (p - 2.0);
    const int n = dim;
    ex.constant_name = "c_p";
    ex.printed_constant = (p - 2.0) * std::pow(k, p - 1.0) * std::pow(k + n, 1.0 / (2.0 - p));
    ex.audited_constant = source_type_constant(p, n);
    ex.constant = constant.value_or(*ex.audited_constant);
    const double c = ex.constant;
    ex.evaluate = [=](const Point& x, double t) {
      const double tau = -t;
      return c * std::pow(norm(x, n), k) * std::pow(tau, -1.0 / (p - 2.0));
    };
    ex.time_derivative = [=](const Point& x, double t) {
      const double tau = -t;
      return c / (p - 2.0) * std::pow(norm(x, n), k) * std::pow(tau, -1.0 / (p - 2.0) - 1.0);
    };
    ex.valid = [=](const Point& x, double t, double margin) {
      return t < 0.0 && -t > margin && norm(x, n) > margin;
    };
    ex.sample_time = -1.0;
    ex.scan_margin = 0.25;
    ex.scan_domain = unit_box(dim);
  } else if (name == "barenblatt") {
    require_p_above_two(name, p);
    const int n = dim;
    const double lambda = n * (p - 2.0) + p;
    const double m = (p - 1.0) / (p - 2.0);
    const double reference_gamma = barenblatt_gamma(p, n);
    const double radius = param_or(params, "support_radius", 0.9);
    // Level C fixed from the reference profile so that perturbing gamma does
    // not move the scan region.
    const double level = param_or(params, "level", reference_gamma * std::pow(radius, q));
    ex.params["lambda"] = lambda;
    ex.params["level"] = level;
    ex.constant_name = "gamma";
    ex.printed_constant = (p - 2.0) / p * std::pow(lambda, -1.0 / (p - 1.0));
    ex.audited_constant = reference_gamma;
    ex.constant = constant.value_or(reference_gamma);
    const double gamma = ex.constant;
    ex.evaluate = [=](const Point& x, double t) {
      const double xi = norm(x, n) * std::pow(t, -1.0 / lambda);
      const double z = level - gamma * std::pow(xi, q);
      return z > 0.0 ? std::pow(t, -n / lambda) * std::pow(z, m) : 0.0;
    };
    ex.time_derivative = [=](const Point& x, double t) {
      const double xi = norm(x, n) * std::pow(t, -1.0 / lambda);
      const double z = level - gamma * std::pow(xi, q);
      if (!(z > 0.0)) return 0.0;
      const double pre = std::pow(t, -n / lambda);
      return -(n / lambda) * pre / t * std::pow(z, m) +
             pre * m * std::pow(z, m - 1.0) * gamma * q * std::pow(xi, q) / (lambda * t);
    };
    ex.valid = [=](const Point& x, double t, double margin) {
      if (!(t > 0.0)) return false;
      const double r = norm(x, n);
      const double support = std::pow(t, 1.0 / lambda) * std::pow(level / reference_gamma, 1.0 / q);
      return r > margin && r < support - margin;
    };
    ex.sample_time = 1.0;
    ex.scan_margin = 0.15;
    ex.scan_domain = unit_box(dim);
  } else if (name == "traveling_wave") {
    require_p_above_two(name, p);
    const double speed = param_or(params, "speed", 1.0);
    if (!(speed > 0.0)) throw ConfigError("traveling_wave speed must be positive");
    const double m = (p - 1.0) / (p - 2.0);
    ex.params["speed"] = speed;
    ex.constant_name = "A";
    ex.printed_constant = std::pow(speed, 1.0 / (p - 1.0)) * std::pow((p - 2.0) / (p - 1.0), m);
    ex.audited_constant = traveling_wave_amplitude(p, speed);
    ex.constant = constant.value_or(*ex.audited_constant);
    const double amp = ex.constant;
    ex.evaluate = [=](const Point& x, double t) {
      const double xi = 1.0 - x[0] + speed * t;
      return xi > 0.0 ? amp * std::pow(xi, m) : 0.0;
    };
    ex.time_derivative = [=](const Point& x, double t) {
      const double xi = 1.0 - x[0] + speed * t;
      return xi > 0.0 ? amp * m * speed * std::pow(xi, m - 1.0) : 0.0;
    };
    ex.valid = [=](const Point& x, double t, double margin) {
      return 1.0 - x[0] + speed * t > margin;
    };
    ex.sample_time = 0.0;
    ex.scan_margin = 0.25;
    ex.scan_domain = unit_box(dim);
  } else {
    throw ConfigError("unknown catalog entry '" + name + "'");
  }
  return ex;
}

ExactSolution with_constant(const ExactSolution& exact, double constant) {
  return catalog(exact.name, exact.p, exact.dim, exact.params, constant);
}

ResidualSample scan_residual(const ExactSolution& exact, const Grid& grid, double time,
                             std::optional<double> margin) {
  const double h = grid.h();
  const double mg = std::max(margin.value_or(exact.scan_margin), 4.0 * h);
  const ScalarField u = ScalarField::sample(grid, [&](const Point& x) { return exact.evaluate(x, time); });
  const ScalarField lap = discrete_p_laplacian(u, exact.p);
  ResidualSample out;
  double sum = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid.is_boundary(i)) continue;
    const Point x = grid.coords(i);
    if (!exact.valid(x, time, mg)) continue;
    const double target =
        exact.kind == SolutionKind::elliptic ? exact.rhs(x) : exact.time_derivative(x, time);
    const double r = lap[i] - target;
    out.max_abs = std::max(out.max_abs, std::abs(r));
    sum += r;
    ++out.samples;
  }
  if (out.samples == 0) {
    throw ConfigError("validity region of '" + exact.name + "' contains no interior grid node");
  }
  out.mean = sum / static_cast<double>(out.samples);
  return out;
}

ResidualReport residual_scan(const ExactSolution& exact, int coarse_nodes, int levels,
                             std::optional<double> margin) {
  if (levels < 3) throw ConfigError("a refinement study needs at least 3 levels");
  ResidualReport rep;
  rep.name = exact.name;
  rep.constant = exact.constant;
  rep.time = exact.sample_time;
  rep.min_rate = std::numeric_limits<double>::infinity();
  int n = coarse_nodes;
  for (int l = 0; l < levels; ++l) {
    const Grid grid = build_grid(exact.scan_domain, {n, n});
    const ResidualSample s = scan_residual(exact, grid, exact.sample_time, margin);
    ResidualLevel lev;
    lev.h = grid.h();
    lev.residual = s.max_abs;
    lev.samples = s.samples;
    lev.rate = std::numeric_limits<double>::quiet_NaN();
    if (!rep.levels.empty()) {
      const auto& prev = rep.levels.back();
      // Residuals at rounding level carry no rate information: report +inf.
      const double floor = 1e-13 * (1.0 + std::abs(exact.constant));
      lev.rate = lev.residual <= floor ? std::numeric_limits<double>::infinity()
                                       : std::log(prev.residual / lev.residual) / std::log(prev.h / lev.h);
      rep.min_rate = std::min(rep.min_rate, lev.rate);
    }
    rep.levels.push_back(lev);
    n = 2 * (n - 1) + 1;
  }
  rep.finest_rate = rep.levels.back().rate;
  return rep;
}

AuditRecord constant_audit(const std::string& name, double p, int dim,
                           const std::map<std::string, double>& params, int nodes) {
  const ExactSolution base = catalog(name, p, dim, params);
  AuditRecord rec;
  rec.name = name;
  rec.constant_name = base.constant_name;
  rec.p = p;
  rec.dim = dim;
  rec.analytic = *base.audited_constant;
  rec.printed = base.printed_constant;
  if (nodes <= 0) nodes = dim == 1 ? 2049 : 257;
  const Grid grid = build_grid(base.scan_domain, {nodes, nodes});
  auto functional = [&](double c) {
    return scan_residual(with_constant(base, c), grid, base.sample_time).mean;
  };
  double lo = 1e-6;
  double hi = 1e6;
  const double f_lo = functional(lo);
  const double f_hi = functional(hi);
  if (!(f_lo < 0.0 && f_hi > 0.0) && !(f_lo > 0.0 && f_hi < 0.0)) {
    rec.ok = false;
    rec.message = "residual does not change sign on [1e-6, 1e6]";
    return rec;
  }
  const bool increasing = f_lo < 0.0;
  while (hi / lo - 1.0 > 1e-10) {
    const double mid = std::sqrt(lo * hi);
    const double f = functional(mid);
    if (f == 0.0) {
      lo = hi = mid;
      break;
    }
    if ((f < 0.0) == increasing) lo = mid;
    else hi = mid;
    ++rec.bisection_steps;
  }
  rec.audited = std::sqrt(lo * hi);
  rec.analytic_agreement = std::abs(rec.audited - rec.analytic) / std::abs(rec.analytic);
  if (rec.printed) rec.relative_discrepancy = std::abs(*rec.printed - rec.audited) / std::abs(rec.audited);
  rec.ok = true;
  std::ostringstream os;
  os << base.constant_name << ": audited " << rec.audited << ", hand-derived " << rec.analytic;
  if (rec.printed) os << ", printed " << *rec.printed << " (relative discrepancy " << *rec.relative_discrepancy << ")";
  rec.message = os.str();
  return rec;
}

ExponentTriple exponent_catalog(double p) {
  if (!(p > 1.0)) throw ConfigError("p must exceed 1");
  ExponentTriple out;
  out.halfspace = p / (p - 1.0);
  if (p > 2.0) {
    out.zero_obstacle = (p - 1.0) / (p - 2.0);
    out.source_type = p / (p - 2.0);
  }
  return out;
}

double discrete_mass(const ExactSolution& exact, const Grid& grid, double time) {
  const ElementMesh mesh(grid);
  const auto& w = mesh.lumped_weights();
  double sum = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) sum += exact.evaluate(grid.coords(i), time) * w[i];
  return sum;
}

}  // namespace plap
