#include "plap/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "plap/errors.hpp"

namespace plap {

double Domain::diameter() const {
  double s = 0.0;
  for (int k = 0; k < dim; ++k) s += (hi[k] - lo[k]) * (hi[k] - lo[k]);
  return std::sqrt(s);
}

double Grid::h() const { return dim() == 1 ? spacing_[0] : std::max(spacing_[0], spacing_[1]); }

Point Grid::coords(std::size_t node) const {
  const auto ij = multi_index(node);
  Point x{domain_.lo[0] + ij[0] * spacing_[0], 0.0};
  if (dim() == 2) x[1] = domain_.lo[1] + ij[1] * spacing_[1];
  return x;
}

bool Grid::is_boundary(std::size_t node) const {
  const auto ij = multi_index(node);
  if (ij[0] == 0 || ij[0] == counts_[0] - 1) return true;
  return dim() == 2 && (ij[1] == 0 || ij[1] == counts_[1] - 1);
}

std::size_t Grid::nearest_node(const Point& x) const {
  std::array<int, 2> ij{0, 0};
  for (int k = 0; k < dim(); ++k) {
    const double s = std::round((x[k] - domain_.lo[k]) / spacing_[k]);
    ij[k] = static_cast<int>(std::clamp(s, 0.0, static_cast<double>(counts_[k] - 1)));
  }
  return index(ij[0], ij[1]);
}

std::vector<std::size_t> Grid::axis_neighbors(std::size_t node) const {
  std::vector<std::size_t> out;
  const auto ij = multi_index(node);
  for (int k = 0; k < dim(); ++k) {
    for (int d : {-1, 1}) {
      auto nb = ij;
      nb[k] += d;
      if (nb[k] < 0 || nb[k] >= counts_[k]) continue;
      out.push_back(index(nb[0], nb[1]));
    }
  }
  return out;
}

Grid build_grid(const Domain& domain, std::array<int, 2> counts) {
  if (domain.dim != 1 && domain.dim != 2) {
    throw ConfigError("grid dimension must be 1 or 2");
  }
  Grid g;
  g.domain_ = domain;
  if (domain.dim == 1) {
    counts[1] = 1;
    g.domain_.lo[1] = 0.0;
    g.domain_.hi[1] = 0.0;
  }
  for (int k = 0; k < domain.dim; ++k) {
    if (counts[k] < 3) {
      std::ostringstream os;
      os << "grid needs at least 3 nodes per axis (axis " << k << " has " << counts[k] << ")";
      throw ConfigError(os.str());
    }
    if (!(domain.hi[k] > domain.lo[k]) || !std::isfinite(domain.hi[k] - domain.lo[k])) {
      throw ConfigError("degenerate domain: hi must exceed lo on every axis");
    }
    g.spacing_[k] = (domain.hi[k] - domain.lo[k]) / (counts[k] - 1);
  }
  g.counts_ = counts;
  return g;
}

Grid make_grid_1d(double lo, double hi, int n) {
  return build_grid(Domain{1, {lo, 0.0}, {hi, 0.0}}, {n, 1});
}

Grid make_grid_2d(Point lo, Point hi, int nx, int ny) {
  return build_grid(Domain{2, lo, hi}, {nx, ny});
}

ScalarField::ScalarField(Grid grid, double fill)
    : grid_(std::move(grid)), values_(grid_.size(), fill) {}

ScalarField::ScalarField(Grid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.size()) {
    throw ConfigError("field length does not match the grid node count");
  }
}

ScalarField ScalarField::sample(const Grid& grid, const std::function<double(const Point&)>& fn) {
  ScalarField f(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) f.values_[i] = fn(grid.coords(i));
  return f;
}

double ScalarField::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

bool ScalarField::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::size_t NodeSet::count() const {
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

std::vector<std::size_t> NodeSet::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mask_.size(); ++i)
    if (mask_[i]) out.push_back(i);
  return out;
}

NodeSet boundary_nodes(const Grid& grid) {
  NodeSet s(grid);
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid.is_boundary(i)) s.insert(i);
  return s;
}

double distance(const Point& a, const Point& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

namespace {

// Index range along axis k that can contain points within `reach` of c.
std::array<int, 2> axis_range(const Grid& grid, int k, double c, double reach) {
  if (k >= grid.dim()) return {0, 0};
  const double lo = grid.domain().lo[k];
  const double h = grid.spacing()[k];
  const int n = grid.counts()[k];
  const double a = std::floor((c - reach - lo) / h) - 1;
  const double b = std::ceil((c + reach - lo) / h) + 1;
  return {static_cast<int>(std::clamp(a, 0.0, n - 1.0)),
          static_cast<int>(std::clamp(b, 0.0, n - 1.0))};
}

template <class Pred>
NodeSet select_near(const Grid& grid, const Point& center, double reach, Pred pred) {
  NodeSet s(grid);
  const auto ri = axis_range(grid, 0, center[0], reach);
  const auto rj = axis_range(grid, 1, center[1], reach);
  for (int j = rj[0]; j <= rj[1]; ++j) {
    for (int i = ri[0]; i <= ri[1]; ++i) {
      const auto node = grid.index(i, j);
      if (pred(distance(grid.coords(node), center))) s.insert(node);
    }
  }
  return s;
}

}  // namespace

NodeSet nodes_in_ball(const Grid& grid, const Point& center, double r) {
  return select_near(grid, center, r, [r](double d) { return d <= r; });
}

NodeSet nodes_on_shell(const Grid& grid, const Point& center, double r, double half_width) {
  const double inner = r - half_width;
  const double outer = r + half_width;
  return select_near(grid, center, outer,
                     [inner, outer](double d) { return d > inner && d <= outer; });
}

bool ball_inside_domain(const Grid& grid, const Point& center, double r) {
  const auto& dom = grid.domain();
  for (int k = 0; k < grid.dim(); ++k) {
    if (center[k] - r < dom.lo[k] || center[k] + r > dom.hi[k]) return false;
  }
  return true;
}

double interpolate(const ScalarField& field, const Point& x) {
  const Grid& grid = field.grid();
  const auto& dom = grid.domain();
  std::array<int, 2> base{0, 0};
  std::array<double, 2> frac{0.0, 0.0};
  for (int k = 0; k < grid.dim(); ++k) {
    const double h = grid.spacing()[k];
    const double slack = 1e-12 * h;
    if (x[k] < dom.lo[k] - slack || x[k] > dom.hi[k] + slack) {
      std::ostringstream os;
      os << "interpolation point outside the domain on axis " << k << " (" << x[k] << ")";
      throw DomainError(os.str());
    }
    const double s = std::clamp((x[k] - dom.lo[k]) / h, 0.0, grid.counts()[k] - 1.0);
    int i = static_cast<int>(std::floor(s));
    if (i >= grid.counts()[k] - 1) i = grid.counts()[k] - 2;
    base[k] = i;
    frac[k] = s - i;
  }
  if (grid.dim() == 1) {
    const double a = field[grid.index(base[0])];
    const double b = field[grid.index(base[0] + 1)];
    return a + frac[0] * (b - a);
  }
  const double v00 = field[grid.index(base[0], base[1])];
  const double v10 = field[grid.index(base[0] + 1, base[1])];
  const double v01 = field[grid.index(base[0], base[1] + 1)];
  const double v11 = field[grid.index(base[0] + 1, base[1] + 1)];
  const double sx = frac[0];
  const double sy = frac[1];
  return (1 - sx) * (1 - sy) * v00 + sx * (1 - sy) * v10 + (1 - sx) * sy * v01 + sx * sy * v11;
}

NodalGradient gradient_at(const ScalarField& field, std::size_t node) {
  const Grid& grid = field.grid();
  const auto ij = grid.multi_index(node);
  NodalGradient out;
  for (int k = 0; k < grid.dim(); ++k) {
    const double h = grid.spacing()[k];
    const int n = grid.counts()[k];
    auto at = [&](int offset) {
      auto m = ij;
      m[k] += offset;
      return field[grid.index(m[0], m[1])];
    };
    if (ij[k] > 0 && ij[k] < n - 1) {
      out.value[k] = (at(1) - at(-1)) / (2 * h);
    } else if (ij[k] == 0) {
      out.value[k] = (-3 * at(0) + 4 * at(1) - at(2)) / (2 * h);
      out.one_sided = true;
    } else {
      out.value[k] = (3 * at(0) - 4 * at(-1) + at(-2)) / (2 * h);
      out.one_sided = true;
    }
  }
  return out;
}

}  // namespace plap
