#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "plap/elliptic.hpp"
#include "plap/mesh.hpp"
#include "plap/parabolic.hpp"

namespace plap {

/// Analytic gradient of an obstacle, x -> grad phi(x).
using GradientFunction = std::function<Vec(const Point&)>;

enum class GradientSource { analytic_obstacle, numeric };

struct GrowthFit {
  Point center{0.0, 0.0};
  std::size_t center_node = 0;
  std::vector<double> radii;  ///< strictly decreasing
  std::vector<double> sups;
  double fitted_slope = 0.0;
  double fitted_intercept = 0.0;
  double expected_exponent = 0.0;
  double alpha_used = 0.0;
  double rss = 0.0;
  /// Obstacle norm bound N and inhomogeneity bound L, recorded as metadata.
  double obstacle_norm = 0.0;
  double rhs_bound = 0.0;
  std::size_t dropped = 0;
};

struct ExponentFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rss = 0.0;
  std::size_t used = 0;
  std::size_t dropped = 0;
};

struct NondegReport {
  Point center{0.0, 0.0};
  std::vector<double> radii;
  /// Shell suprema of u - phi over non-contact nodes (0 when none).
  std::vector<double> shell_sup;
  /// Cumulative variant: sup over the ball B_r of u - phi.
  std::vector<double> ball_sup;
  std::vector<bool> degenerate;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  double epsilon_measured = 0.0;
};

struct PorosityReport {
  std::vector<Point> points;
  std::vector<double> radii;
  /// densities[i][k] for point i and radius k.
  std::vector<std::vector<double>> densities;
  double max_density = 0.0;
  double delta_measured = 0.0;
};

struct BlowupField {
  Point base{0.0, 0.0};
  double radius = 0.0;
  double alpha = 0.0;
  /// Unit reference grid on [-1, 1]^dim.
  ScalarField u;
  std::optional<ScalarField> obstacle;
  std::optional<ScalarField> rhs;
  /// max |u~| over the half ball B_{1/2}.
  double half_ball_max = 0.0;
};

/// Nodes where the solver's obstacle constraint binds.
NodeSet contact_set(const EllipticSolution& solution);

struct ContactCrossCheck {
  NodeSet thresholded;
  std::size_t symmetric_difference = 0;
};

/// Threshold variant: interior nodes with u - phi <= threshold.
ContactCrossCheck contact_set_threshold(const EllipticSolution& solution,
                                        const EllipticProblem& problem, double threshold);

/// Contact nodes with at least one non-contact axis neighbour. Boundary nodes
/// count as contact iff u <= phi there.
NodeSet free_boundary(const NodeSet& active, const ScalarField& u,
                      const std::optional<ScalarField>& obstacle, const NodeSet& boundary_mask);
NodeSet free_boundary(const EllipticSolution& solution, const EllipticProblem& problem);

/// Free-boundary node closest to `anchor`; throws MeasurementError if Gamma is empty.
std::size_t snap_to_free_boundary(const NodeSet& gamma, const Point& anchor);

/// sup over nodes of B_r(y) of |u(x) - u(y) - (x - y) . gradient|.
/// Throws MeasurementError when the ball leaves the domain.
double growth_sup(const ScalarField& u, std::size_t center_node, double r, const Vec& gradient);

/// Gradient used at a free-boundary node: the obstacle's analytic gradient
/// when available, otherwise centered differences of u.
Vec reference_gradient(const ScalarField& u, std::size_t node, GradientSource source,
                       const GradientFunction& obstacle_gradient);

/// r_k = r_max 2^{-k}, k < count; throws MeasurementError if r_min < 8 h.
std::vector<double> dyadic_radii(double r_max, int count, double h, double min_cells = 8.0);

/// Least squares line through (log r, log S); zero sups are dropped.
/// Throws MeasurementError with fewer than 4 usable points.
ExponentFit fit_exponent(const std::vector<double>& radii, const std::vector<double>& sups);

/// Full growth measurement at the free-boundary node nearest `anchor`.
GrowthFit measure_growth(const ScalarField& u, const NodeSet& gamma, const Point& anchor,
                         const std::vector<double>& radii, GradientSource source,
                         const GradientFunction& obstacle_gradient, double expected_exponent);

/// 1 + alpha with alpha = min(1/(p-1), beta), or alpha = beta when f = 0.
double expected_growth_exponent(double p, double beta, bool homogeneous);

struct NondegHypotheses {
  double p = 3.0;
  double rhs_max_abs = 0.0;
  /// Certified Delta_p phi < 0 (from the obstacle catalog).
  bool obstacle_strict_supersolution = false;
};

NondegReport nondegeneracy_profile(const EllipticSolution& solution, const EllipticProblem& problem,
                                   const Point& x0, const std::vector<double>& radii,
                                   double shell_half_width, const NondegHypotheses& hypotheses);

/// Cell density of Gamma in B_r(y): a cell counts when it owns (has as its
/// lower-left corner) a Gamma node. Throws MeasurementError when r < 4h.
double porosity_density(const NodeSet& gamma, const Point& y, double r);

PorosityReport porosity_report(const NodeSet& gamma, const std::vector<std::size_t>& points,
                               const std::vector<double>& radii);

/// Up to `count` Gamma nodes, evenly spread over the index order, whose
/// ball of radius `r_max` stays inside the domain.
std::vector<std::size_t> sample_free_boundary(const NodeSet& gamma, std::size_t count, double r_max);

/// u~(x) = (u(r x + y) - u(y)) / r^{1+alpha} on a reference grid with
/// `reference_nodes` nodes per axis; f~(x) = r^{1 - alpha (p-1)} f(r x + y).
BlowupField blowup_rescale(const ScalarField& u, const Point& y, double r, double alpha,
                           const std::optional<ScalarField>& rhs, double p,
                           const std::optional<ScalarField>& obstacle = std::nullopt,
                           int reference_nodes = 65);

/// sup over the spatial ball and the stored slices with t in (s - r^q, s] of
/// |u(x,t) - u(y,s) - (x - y) . gradient|, q = p/(p-1).
double parabolic_growth_sup(const ParabolicSolution& solution, std::size_t slice,
                            std::size_t center_node, double r, double p, const Vec& gradient);

}  // namespace plap
