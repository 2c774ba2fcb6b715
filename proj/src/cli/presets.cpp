#include "plap/cli/presets.hpp"

#include <cmath>
#include <set>

#include "plap/errors.hpp"

namespace plap::cli {

namespace {

void check_keys(const std::string& preset, const std::map<std::string, double>& params,
                const std::set<std::string>& allowed) {
  for (const auto& [key, value] : params) {
    if (!allowed.count(key)) throw ConfigError("preset " + preset + ": unknown parameter '" + key + "'");
    if (!std::isfinite(value)) throw ConfigError("preset " + preset + ": parameter '" + key + "' is not finite");
  }
}

double get(const std::map<std::string, double>& params, const char* key, double fallback) {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

}  // namespace

ObstaclePreset make_preset(const std::string& name, const std::map<std::string, double>& params,
                           double p, const Domain& domain) {
  ObstaclePreset out;
  out.name = name;
  const int dim = domain.dim;
  if (name == "power_ridge") {
    check_keys(name, params, {"amplitude", "beta", "offset"});
    const double a = get(params, "amplitude", 1.0);
    const double beta = get(params, "beta", 1.0);
    const double c = get(params, "offset", 0.0);
    if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("preset power_ridge: beta must lie in (0, 1]");
    out.beta = beta;
    out.value = [=](const Point& x) { return c - a * std::pow(std::abs(x[0]), 1.0 + beta); };
    out.gradient = [=](const Point& x) {
      const double s = x[0] > 0.0 ? 1.0 : (x[0] < 0.0 ? -1.0 : 0.0);
      return Vec{-a * (1.0 + beta) * s * std::pow(std::abs(x[0]), beta), 0.0};
    };
    // The p-Laplacian of the ridge vanishes on x_1 = 0 unless p = 2.
    out.strict_supersolution = p == 2.0 && a > 0.0 && beta == 1.0;
  } else if (name == "dome" || name == "tilted_dome") {
    check_keys(name, params, name == "dome" ? std::set<std::string>{"kappa", "offset"}
                                            : std::set<std::string>{"kappa", "slope", "offset"});
    const double kappa = get(params, "kappa", 0.5);
    const double b = name == "dome" ? 0.0 : get(params, "slope", 1.5);
    const double c = get(params, "offset", 0.0);
    out.beta = 1.0;
    out.value = [=](const Point& x) {
      const double r2 = x[0] * x[0] + (dim == 2 ? x[1] * x[1] : 0.0);
      return c - kappa * r2 + b * x[0];
    };
    out.gradient = [=](const Point& x) {
      return Vec{-2.0 * kappa * x[0] + b, dim == 2 ? -2.0 * kappa * x[1] : 0.0};
    };
    // Delta_p phi = -2 kappa |grad phi|^(p-2) (n + p - 2): strictly negative
    // wherever grad phi != 0, which the tilt guarantees on the box.
    const double reach = std::max(std::abs(domain.lo[0]), std::abs(domain.hi[0]));
    const bool gradient_nonzero = std::abs(b) > 2.0 * kappa * reach;
    out.strict_supersolution = kappa > 0.0 && (p <= 2.0 || gradient_nonzero);
  } else {
    throw ConfigError("unknown obstacle preset '" + name + "'");
  }
  return out;
}

}  // namespace plap::cli
