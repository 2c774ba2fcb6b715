#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "plap/mesh.hpp"

namespace plap {

enum class SolutionKind { elliptic, parabolic };

/// Closed-form solution used as ground truth. Printed constants are kept
/// verbatim in `printed_constant` and never used unless asked for.
struct ExactSolution {
  std::string name;
  int dim = 1;
  double p = 2.0;
  std::map<std::string, double> params;
  SolutionKind kind = SolutionKind::parabolic;

  std::function<double(const Point&, double)> evaluate;
  std::function<double(const Point&, double)> time_derivative;
  /// Inhomogeneity f for elliptic entries (Delta_p u = f in the smooth region).
  std::function<double(const Point&)> rhs;
  /// True when (x, t) lies in the smooth region at distance >= margin from
  /// every non-smooth set of the formula.
  std::function<bool(const Point&, double, double)> valid;

  /// Name of the scalar degree of freedom that the audit determines.
  std::string constant_name;
  double constant = 0.0;
  std::optional<double> printed_constant;
  /// Value derived by hand (symbolic substitution), used as the cross-check.
  std::optional<double> audited_constant;

  /// Time at which residual scans sample the formula.
  double sample_time = 0.0;
  /// Physical exclusion distance used by default scans.
  double scan_margin = 0.2;
  /// Default scan box.
  Domain scan_domain;
};

/// name is one of elliptic_halfspace, parabolic_halfspace, source_type,
/// barenblatt, traveling_wave. Throws ConfigError for an unknown name or an
/// inadmissible p (source_type, barenblatt and traveling_wave need p > 2).
/// The constant defaults to the hand-derived value; pass `constant` to
/// override it (e.g. with the printed value or a perturbation).
ExactSolution catalog(const std::string& name, double p, int dim,
                      const std::map<std::string, double>& params = {},
                      std::optional<double> constant = std::nullopt);

/// Same entry with a different value of its scalar constant.
ExactSolution with_constant(const ExactSolution& exact, double constant);

struct ResidualLevel {
  double h = 0.0;
  double residual = 0.0;
  /// Observed rate against the previous (coarser) level; NaN on the first,
  /// +inf once the residual sits at rounding level.
  double rate = 0.0;
  std::size_t samples = 0;
};

struct ResidualReport {
  std::string name;
  double constant = 0.0;
  double time = 0.0;
  std::vector<ResidualLevel> levels;
  double min_rate = 0.0;
  double finest_rate = 0.0;
};

struct ResidualSample {
  double max_abs = 0.0;
  double mean = 0.0;
  std::size_t samples = 0;
};

/// max |Delta_p^h u - u_t| (or Delta_p^h u - f) over interior nodes in the
/// validity region with margin max(margin, 4h). Throws ConfigError when no
/// node qualifies.
ResidualSample scan_residual(const ExactSolution& exact, const Grid& grid, double time,
                             std::optional<double> margin = std::nullopt);

/// Refinement study on the entry's scan box: counts n0, 2(n0-1)+1, ...
ResidualReport residual_scan(const ExactSolution& exact, int coarse_nodes, int levels,
                             std::optional<double> margin = std::nullopt);

struct AuditRecord {
  std::string name;
  std::string constant_name;
  double p = 0.0;
  int dim = 0;
  /// Root of the signed mean residual on the audit grid.
  double audited = 0.0;
  /// Hand-derived value.
  double analytic = 0.0;
  std::optional<double> printed;
  /// |printed - audited| / |audited|, when a printed value exists.
  std::optional<double> relative_discrepancy;
  /// |audited - analytic| / |analytic|.
  double analytic_agreement = 0.0;
  int bisection_steps = 0;
  bool ok = false;
  std::string message;
};

/// Determines the entry's constant by geometric bisection of the signed mean
/// residual over [1e-6, 1e6] (relative width 1e-10) on an audit grid with
/// `nodes` nodes per axis. Reports, never reconciles, the printed value.
AuditRecord constant_audit(const std::string& name, double p, int dim,
                           const std::map<std::string, double>& params = {}, int nodes = 0);

struct ExponentTriple {
  double halfspace = 0.0;                 ///< p/(p-1)
  std::optional<double> zero_obstacle;    ///< (p-1)/(p-2), p > 2
  std::optional<double> source_type;      ///< p/(p-2), p > 2
};

/// Throws ConfigError for p <= 1.
ExponentTriple exponent_catalog(double p);

/// sum_i u(x_i, t) w_i with lumped weights on `grid`.
double discrete_mass(const ExactSolution& exact, const Grid& grid, double time);

}  // namespace plap
