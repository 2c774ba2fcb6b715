#pragma once

#include <functional>
#include <map>
#include <string>

#include "plap/freeboundary.hpp"
#include "plap/mesh.hpp"

namespace plap::cli {

/// Obstacle with a certified Hoelder exponent of its gradient and an analytic
/// gradient, so growth measurements need not differentiate the discrete data.
struct ObstaclePreset {
  std::string name;
  std::function<double(const Point&)> value;
  GradientFunction gradient;
  double beta = 1.0;
  /// Delta_p phi < 0 holds on the whole domain for this p.
  bool strict_supersolution = false;
};

/// Presets:
///   power_ridge   c - a |x_1|^(1+beta), 0 < beta <= 1
///   dome          c - kappa |x|^2
///   tilted_dome   c - kappa |x|^2 + b x_1
/// Unknown names or parameters raise ConfigError.
ObstaclePreset make_preset(const std::string& name, const std::map<std::string, double>& params,
                           double p, const Domain& domain);

}  // namespace plap::cli
