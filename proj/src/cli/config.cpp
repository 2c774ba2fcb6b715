#include "plap/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "plap/errors.hpp"

namespace plap::cli {

using nlohmann::json;

namespace {

// Walks one JSON object, echoes every value it reads (defaults included)
// into `out`, and rejects keys nobody asked for.
class Reader {
 public:
  Reader(const json& in, json& out, std::string path) : in_(in), out_(out), path_(std::move(path)) {
    if (!in_.is_object()) fail("expected an object");
    out_ = json::object();
  }

  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(path_ + ": " + what); }
  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(path_ + "." + key + ": " + what);
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return in_.contains(key) && !in_.at(key).is_null();
  }

  double number(const std::string& key) {
    if (!has(key)) fail(key, "required");
    const json& v = in_.at(key);
    if (!v.is_number()) fail(key, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(key, "must be finite");
    out_[key] = d;
    return d;
  }
  double number(const std::string& key, double fallback) {
    if (!has(key)) {
      out_[key] = fallback;
      return fallback;
    }
    return number(key);
  }
  std::optional<double> optional_number(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return number(key);
  }

  int integer(const std::string& key) {
    if (!has(key)) fail(key, "required");
    const json& v = in_.at(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    const auto i = v.get<long long>();
    if (i < -1000000000LL || i > 1000000000LL) fail(key, "out of range");
    out_[key] = i;
    return static_cast<int>(i);
  }
  int integer(const std::string& key, int fallback) {
    if (!has(key)) {
      out_[key] = fallback;
      return fallback;
    }
    return integer(key);
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) {
      out_[key] = fallback;
      return fallback;
    }
    const json& v = in_.at(key);
    if (!v.is_boolean()) fail(key, "expected true or false");
    out_[key] = v.get<bool>();
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    if (!has(key)) fail(key, "required");
    const json& v = in_.at(key);
    if (!v.is_string()) fail(key, "expected a string");
    out_[key] = v.get<std::string>();
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) {
      out_[key] = fallback;
      return fallback;
    }
    return string(key);
  }
  std::string choice(const std::string& key, const std::string& fallback,
                     const std::vector<std::string>& allowed) {
    const std::string s = string(key, fallback);
    for (const auto& a : allowed)
      if (a == s) return s;
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    fail(key, "must be one of " + list + " (got '" + s + "')");
  }

  std::vector<double> numbers(const std::string& key) {
    if (!has(key)) fail(key, "required");
    const json& v = in_.at(key);
    if (!v.is_array()) fail(key, "expected an array of numbers");
    std::vector<double> out;
    json echo = json::array();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number() || !std::isfinite(v[i].get<double>())) {
        fail(key + "[" + std::to_string(i) + "]", "expected a finite number");
      }
      out.push_back(v[i].get<double>());
      echo.push_back(out.back());
    }
    out_[key] = echo;
    return out;
  }

  std::map<std::string, double> number_map(const std::string& key) {
    std::map<std::string, double> out;
    if (!has(key)) {
      out_[key] = json::object();
      return out;
    }
    const json& v = in_.at(key);
    if (!v.is_object()) fail(key, "expected an object of numbers");
    json echo = json::object();
    for (auto it = v.begin(); it != v.end(); ++it) {
      if (!it->is_number() || !std::isfinite(it->get<double>())) {
        fail(key + "." + it.key(), "expected a finite number");
      }
      out[it.key()] = it->get<double>();
      echo[it.key()] = it->get<double>();
    }
    out_[key] = echo;
    return out;
  }

  const json& raw(const std::string& key) const { return in_.at(key); }
  json& echo(const std::string& key) { return out_[key]; }
  std::string path(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = in_.begin(); it != in_.end(); ++it) {
      if (!seen_.count(it.key())) fail(it.key(), "unknown key");
    }
  }

 private:
  const json& in_;
  json& out_;
  std::string path_;
  std::set<std::string> seen_;
};

FieldExpr expression(Reader& r, const std::string& key, const std::set<std::string>& allowed_vars) {
  const std::string text = r.string(key);
  FieldExpr f;
  f.text = text;
  try {
    f.ast = parse_expression(text);
  } catch (const ParseError& e) {
    r.fail(key, e.what());
  }
  for (const auto& v : free_variables(f.ast)) {
    if (!allowed_vars.count(v)) r.fail(key, "variable '" + v + "' is not available here");
  }
  return f;
}

const std::vector<std::string> kKinds = {"elliptic", "parabolic", "oracle", "audit",
                                         "growth", "nondeg", "porosity", "convergence"};

}  // namespace

std::string to_string(Kind kind) { return kKinds[static_cast<std::size_t>(kind)]; }

Kind kind_from_string(const std::string& name) {
  for (std::size_t i = 0; i < kKinds.size(); ++i)
    if (kKinds[i] == name) return static_cast<Kind>(i);
  throw ConfigError("$.kind: unknown kind '" + name + "'");
}

Grid make_grid(const GridSpec& spec) {
  return build_grid(Domain{spec.dim, spec.lo, spec.hi}, spec.nodes);
}

ExperimentConfig parse_config(const json& doc, std::optional<Kind> forced_kind) {
  ExperimentConfig cfg;
  json canonical;
  Reader top(doc, canonical, "$");

  if (top.has("kind")) {
    cfg.kind = kind_from_string(top.string("kind"));
    if (forced_kind && *forced_kind != cfg.kind) {
      top.fail("kind", "config describes '" + to_string(cfg.kind) + "' but the command runs '" +
                           to_string(*forced_kind) + "'");
    }
  } else if (forced_kind) {
    cfg.kind = *forced_kind;
    canonical["kind"] = to_string(cfg.kind);
  } else {
    top.fail("kind", "required");
  }
  const Kind kind = cfg.kind;
  const bool catalog_only = kind == Kind::oracle || kind == Kind::audit;

  cfg.p = top.number("p");
  if (!(cfg.p > 1.0)) top.fail("p", "p must exceed 1");

  if (top.has("time")) {
    Reader t(top.raw("time"), top.echo("time"), top.path("time"));
    TimeSpec ts;
    ts.horizon = t.number("horizon");
    ts.dt = t.number("dt", 0.0);
    if (!(ts.horizon > 0.0)) t.fail("horizon", "must be positive");
    if (ts.dt < 0.0) t.fail("dt", "must be positive (0 selects dt = h)");
    t.finish();
    cfg.time = ts;
  }
  const bool parabolic = kind == Kind::parabolic || (kind == Kind::growth && cfg.time);
  if (kind == Kind::parabolic && !cfg.time) top.fail("time", "required for parabolic runs");
  if (cfg.time && !(kind == Kind::parabolic || kind == Kind::growth)) {
    top.fail("time", "only parabolic and growth runs take a time section");
  }

  if (top.has("grid")) {
    Reader g(top.raw("grid"), top.echo("grid"), top.path("grid"));
    GridSpec gs;
    gs.dim = g.integer("dim");
    if (gs.dim != 1 && gs.dim != 2) g.fail("dim", "must be 1 or 2");
    const std::vector<double> lo =
        g.has("lo") ? g.numbers("lo") : std::vector<double>(gs.dim, -1.0);
    const std::vector<double> hi = g.has("hi") ? g.numbers("hi") : std::vector<double>(gs.dim, 1.0);
    if (lo.size() != static_cast<std::size_t>(gs.dim)) g.fail("lo", "needs one entry per dimension");
    if (hi.size() != static_cast<std::size_t>(gs.dim)) g.fail("hi", "needs one entry per dimension");
    g.echo("lo") = lo;
    g.echo("hi") = hi;
    for (int k = 0; k < gs.dim; ++k) {
      gs.lo[k] = lo[k];
      gs.hi[k] = hi[k];
      if (!(hi[k] > lo[k])) g.fail("hi", "must exceed lo on every axis");
    }
    if (gs.dim == 1) gs.lo[1] = gs.hi[1] = 0.0;
    if (!g.has("nodes")) g.fail("nodes", "required");
    if (g.raw("nodes").is_number_integer()) {
      const int n = g.integer("nodes");
      gs.nodes = {n, gs.dim == 2 ? n : 1};
    } else {
      const std::vector<double> n = g.numbers("nodes");
      if (n.size() != static_cast<std::size_t>(gs.dim)) g.fail("nodes", "needs one entry per dimension");
      for (double v : n)
        if (v != std::floor(v)) g.fail("nodes", "entries must be integers");
      gs.nodes = {static_cast<int>(n[0]), gs.dim == 2 ? static_cast<int>(n[1]) : 1};
    }
    for (int k = 0; k < gs.dim; ++k)
      if (gs.nodes[k] < 3) g.fail("nodes", "at least 3 nodes per axis");
    g.echo("nodes") = gs.dim == 2 ? json::array({gs.nodes[0], gs.nodes[1]}) : json::array({gs.nodes[0]});
    g.finish();
    cfg.grid = gs;
  } else if (!catalog_only) {
    top.fail("grid", "required");
  }
  const int dim = cfg.grid ? cfg.grid->dim : 1;

  std::set<std::string> space{"x"};
  if (dim == 2) space.insert("y");
  std::set<std::string> spacetime = space;
  spacetime.insert("t");

  if (top.has("data")) {
    if (catalog_only) top.fail("data", "oracle and audit runs take no data section");
    Reader d(top.raw("data"), top.echo("data"), top.path("data"));
    const auto& vars = parabolic ? spacetime : space;
    if (d.has("obstacle")) {
      ObstacleSpec os;
      if (d.raw("obstacle").is_string()) {
        os.expression = expression(d, "obstacle", vars);
      } else {
        Reader o(d.raw("obstacle"), d.echo("obstacle"), d.path("obstacle"));
        os.preset = o.string("preset");
        os.params = o.number_map("params");
        o.finish();
        if (parabolic) d.fail("obstacle", "presets are stationary; use an expression in x, y, t");
      }
      cfg.data.obstacle = os;
    }
    cfg.data.beta = d.optional_number("beta");
    if (cfg.data.beta && !(*cfg.data.beta > 0.0 && *cfg.data.beta <= 1.0)) d.fail("beta", "must lie in (0, 1]");
    if (d.has("rhs")) {
      if (parabolic) d.fail("rhs", "parabolic problems take f = 0");
      cfg.data.rhs = expression(d, "rhs", space);
    } else {
      cfg.data.rhs.text = "0";
      cfg.data.rhs.ast = parse_expression("0");
      if (!parabolic) d.echo("rhs") = "0";
    }
    if (d.has("boundary")) cfg.data.boundary = expression(d, "boundary", vars);
    if (d.has("initial")) {
      if (!parabolic) d.fail("initial", "only parabolic runs take an initial datum");
      cfg.data.initial = expression(d, "initial", space);
    }
    if (d.has("exact")) cfg.data.exact = expression(d, "exact", vars);
    d.finish();
    if (!cfg.data.boundary) {
      if (cfg.data.exact) cfg.data.boundary = cfg.data.exact;
      else d.fail("boundary", "required (or give 'exact')");
    }
  } else if (!catalog_only) {
    top.fail("data", "required");
  }

  {
    json empty = json::object();
    Reader s(top.has("solver") ? top.raw("solver") : empty, top.echo("solver"), top.path("solver"));
    SolverConfig& sc = cfg.solver.config;
    sc.outer_tol = s.number("outer_tol", 0.0);
    if (sc.outer_tol < 0.0) s.fail("outer_tol", "must be non-negative (0 selects the default)");
    sc.max_sweeps = s.integer("max_sweeps", 200000);
    if (sc.max_sweeps < 1) s.fail("max_sweeps", "must be positive");
    sc.node_tol = s.number("node_tol", 1e-13);
    if (!(sc.node_tol > 0.0)) s.fail("node_tol", "must be positive");
    sc.sweep_order = s.choice("sweep_order", "lexicographic", {"lexicographic", "red_black"}) == "red_black"
                         ? SweepOrder::red_black
                         : SweepOrder::lexicographic;
    sc.seed_field = s.choice("seed", "boundary_extension", {"boundary_extension", "obstacle"}) == "obstacle"
                        ? SeedField::obstacle
                        : SeedField::boundary_extension;
    sc.check_interval = s.integer("check_interval", 10);
    if (sc.check_interval < 1) s.fail("check_interval", "must be positive");
    if (s.has("relaxation") && s.raw("relaxation").is_number()) {
      const double w = s.number("relaxation");
      if (!(w >= 1.0 && w < 2.0)) s.fail("relaxation", "must lie in [1, 2)");
      cfg.solver.relaxation = w;
    } else if (s.choice("relaxation", "auto", {"auto"}) != "auto") {
      s.fail("relaxation", "expected a number or \"auto\"");
    }
    s.finish();
  }

  {
    json empty = json::object();
    Reader m(top.has("measurement") ? top.raw("measurement") : empty, top.echo("measurement"),
             top.path("measurement"));
    MeasurementSpec& ms = cfg.measurement;
    if (m.has("anchor")) {
      const auto a = m.numbers("anchor");
      if (a.size() != static_cast<std::size_t>(dim)) m.fail("anchor", "needs one entry per dimension");
      ms.anchor = {a[0], dim == 2 ? a[1] : 0.0};
    } else {
      m.echo("anchor") = std::vector<double>(dim, 0.0);
    }
    ms.radii_count = m.integer("radii_count", 4);
    if (ms.radii_count < 1) m.fail("radii_count", "must be positive");
    if (kind == Kind::growth && ms.radii_count < 4) m.fail("radii_count", "a growth fit needs at least 4 radii");
    ms.r_max = m.number("r_max", 0.5);
    if (!(ms.r_max > 0.0)) m.fail("r_max", "must be positive");
    ms.min_cells = m.number("min_cells", 8.0);
    if (m.has("gradient")) ms.gradient = m.choice("gradient", "analytic", {"analytic", "numeric"});
    ms.expected_exponent = m.optional_number("expected_exponent");
    ms.slope_tolerance = m.number("slope_tolerance", 0.15);
    ms.blowup_factor = m.number("blowup_factor", 3.0);
    ms.shell_half_width = m.number("shell_half_width", 0.0);
    if (ms.shell_half_width < 0.0) m.fail("shell_half_width", "must be non-negative");
    ms.ratio_floor = m.number("ratio_floor", 0.1);
    ms.points = m.integer("points", 8);
    if (ms.points < 1) m.fail("points", "must be positive");
    if (m.has("porosity_cells")) ms.porosity_cells = m.numbers("porosity_cells");
    else m.echo("porosity_cells") = ms.porosity_cells;
    for (double c : ms.porosity_cells)
      if (c < 4.0) m.fail("porosity_cells", "radii below 4 cells are meaningless");
    ms.density_max = m.number("density_max", 0.95);
    ms.slice_time = m.optional_number("slice_time");
    ms.lipschitz_tol = m.number("lipschitz_tol", 0.05);
    m.finish();
  }

  if (top.has("oracle")) {
    Reader o(top.raw("oracle"), top.echo("oracle"), top.path("oracle"));
    OracleSpec os;
    os.name = o.string("name");
    if (o.has("dim")) {
      os.dim = o.integer("dim");
      if (*os.dim != 1 && *os.dim != 2) o.fail("dim", "must be 1 or 2");
    }
    os.params = o.number_map("params");
    if (o.has("constant") && o.raw("constant").is_number()) {
      os.constant = o.number("constant");
    } else {
      os.constant = o.choice("constant", "audited", {"audited", "printed"});
    }
    os.perturbation = o.number("perturbation", 0.0);
    if (!(os.perturbation > -1.0)) o.fail("perturbation", "must exceed -1");
    os.coarse_nodes = o.integer("coarse_nodes", 33);
    if (os.coarse_nodes < 5) o.fail("coarse_nodes", "at least 5 nodes");
    os.levels = o.integer("levels", 3);
    if (os.levels < 3) o.fail("levels", "a refinement study needs at least 3 levels");
    os.min_rate = o.number("min_rate", 0.8);
    os.margin = o.optional_number("margin");
    os.audit_nodes = o.integer("audit_nodes", 0);
    os.audit_tol = o.number("audit_tol", 1e-3);
    o.finish();
    cfg.oracle = os;
  } else if (catalog_only) {
    top.fail("oracle", "required for oracle and audit runs");
  }

  {
    json empty = json::object();
    Reader c(top.has("convergence") ? top.raw("convergence") : empty, top.echo("convergence"),
             top.path("convergence"));
    cfg.convergence.levels = c.integer("levels", 3);
    if (cfg.convergence.levels < 3) c.fail("levels", "a convergence study needs at least 3 levels");
    cfg.convergence.reference = c.choice("reference", "exact", {"exact", "psor"});
    cfg.convergence.min_rate = c.number("min_rate", 0.8);
    c.finish();
    if (kind == Kind::convergence) {
      if (cfg.convergence.reference == "exact" && !cfg.data.exact) {
        top.fail("data", "a convergence study against 'exact' needs data.exact");
      }
      if (cfg.convergence.reference == "psor" && cfg.p != 2.0) {
        top.fail("convergence", "the projected SOR reference exists only for p = 2");
      }
    }
  }

  {
    json empty = json::object();
    Reader o(top.has("output") ? top.raw("output") : empty, top.echo("output"), top.path("output"));
    cfg.output.dir = o.string("dir", "out");
    cfg.output.solution_bin = o.boolean("solution_bin", false);
    o.finish();
  }

  top.finish();
  cfg.canonical = canonical;
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, std::optional<Kind> forced_kind) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_config(doc, forced_kind);
}

std::string config_digest(const json& canonical) {
  const std::string text = canonical.dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace plap::cli
