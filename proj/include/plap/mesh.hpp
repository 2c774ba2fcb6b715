#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace plap {

/// Points and vectors are stored with two components; in 1D the second is 0.
using Point = std::array<double, 2>;
using Vec = std::array<double, 2>;

/// Axis-aligned box in dimension 1 or 2.
struct Domain {
  int dim = 2;
  Point lo{0.0, 0.0};
  Point hi{1.0, 1.0};

  double diameter() const;
};

/// Uniform tensor grid of nodes. Nodes are numbered lexicographically with
/// the first axis running fastest.
class Grid {
 public:
  Grid() = default;

  int dim() const { return domain_.dim; }
  const Domain& domain() const { return domain_; }
  const std::array<int, 2>& counts() const { return counts_; }
  const Vec& spacing() const { return spacing_; }
  /// Largest spacing over the active axes.
  double h() const;
  std::size_t size() const {
    return static_cast<std::size_t>(counts_[0]) * static_cast<std::size_t>(counts_[1]);
  }

  std::size_t index(int i, int j = 0) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(counts_[0]) +
           static_cast<std::size_t>(i);
  }
  std::array<int, 2> multi_index(std::size_t node) const {
    return {static_cast<int>(node % counts_[0]), static_cast<int>(node / counts_[0])};
  }
  Point coords(std::size_t node) const;
  bool is_boundary(std::size_t node) const;
  /// Nearest node to a point (clamped to the grid).
  std::size_t nearest_node(const Point& x) const;
  /// Grid neighbours along the axes (4 in 2D, 2 in 1D), skipping missing ones.
  std::vector<std::size_t> axis_neighbors(std::size_t node) const;

  bool operator==(const Grid& other) const {
    return domain_.dim == other.domain_.dim && domain_.lo == other.domain_.lo &&
           domain_.hi == other.domain_.hi && counts_ == other.counts_;
  }

  friend Grid build_grid(const Domain& domain, std::array<int, 2> counts);

 private:
  Domain domain_;
  std::array<int, 2> counts_{1, 1};
  Vec spacing_{0.0, 0.0};
};

/// Throws ConfigError when a count is below 3 or the box is degenerate.
/// In 1D `counts[1]` is ignored.
Grid build_grid(const Domain& domain, std::array<int, 2> counts);

/// Convenience overloads.
Grid make_grid_1d(double lo, double hi, int n);
Grid make_grid_2d(Point lo, Point hi, int nx, int ny);

/// Nodal real values on a grid.
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(Grid grid, double fill = 0.0);
  ScalarField(Grid grid, std::vector<double> values);

  /// Samples `fn` at every node.
  static ScalarField sample(const Grid& grid, const std::function<double(const Point&)>& fn);

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  double max_abs() const;
  bool all_finite() const;

 private:
  Grid grid_;
  std::vector<double> values_;
};

/// Membership mask over the nodes of a grid.
class NodeSet {
 public:
  NodeSet() = default;
  explicit NodeSet(Grid grid) : grid_(std::move(grid)), mask_(grid_.size(), 0) {}

  const Grid& grid() const { return grid_; }
  bool contains(std::size_t node) const { return mask_[node] != 0; }
  void insert(std::size_t node) { mask_[node] = 1; }
  void erase(std::size_t node) { mask_[node] = 0; }
  std::size_t count() const;
  bool empty() const { return count() == 0; }
  std::vector<std::size_t> indices() const;
  const std::vector<std::uint8_t>& mask() const { return mask_; }

  bool operator==(const NodeSet& other) const { return mask_ == other.mask_; }

 private:
  Grid grid_;
  std::vector<std::uint8_t> mask_;
};

/// All boundary nodes of the grid.
NodeSet boundary_nodes(const Grid& grid);

double distance(const Point& a, const Point& b);

/// Nodes at Euclidean distance <= r from `center` (closed ball).
NodeSet nodes_in_ball(const Grid& grid, const Point& center, double r);

/// Nodes at distance in (r - half_width, r + half_width].
NodeSet nodes_on_shell(const Grid& grid, const Point& center, double r, double half_width);

/// True when the closed ball lies inside the box.
bool ball_inside_domain(const Grid& grid, const Point& center, double r);

/// Multilinear interpolation; throws DomainError outside the box
/// (a slack of 1e-12 h is allowed).
double interpolate(const ScalarField& field, const Point& x);

struct NodalGradient {
  Vec value{0.0, 0.0};
  /// True when a one-sided stencil was used on at least one axis.
  bool one_sided = false;
};

/// Second-order differences: centered in the interior, one-sided
/// (three-point) at the boundary.
NodalGradient gradient_at(const ScalarField& field, std::size_t node);

}  // namespace plap
