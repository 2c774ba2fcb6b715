#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <optional>
#include <string>
#include <vector>

#include "plap/cli/config.hpp"
#include "plap/cli/expression.hpp"
#include "plap/cli/runner.hpp"
#include "plap/elliptic.hpp"
#include "plap/errors.hpp"
#include "plap/oracles.hpp"
#include "plap/penergy.hpp"

namespace py = pybind11;
using namespace plap;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// nodes has one entry per axis; lo and hi match it.
Grid grid_from(const std::vector<double>& lo, const std::vector<double>& hi, const std::vector<int>& nodes) {
  if (nodes.empty() || nodes.size() > 2 || lo.size() != nodes.size() || hi.size() != nodes.size()) {
    throw ConfigError("lo, hi and nodes must have one or two entries each");
  }
  if (nodes.size() == 1) return make_grid_1d(lo[0], hi[0], nodes[0]);
  return make_grid_2d({lo[0], lo[1]}, {hi[0], hi[1]}, nodes[0], nodes[1]);
}

// 2D arrays are indexed [j, i] so that x runs along the last axis.
ScalarField field_from(const Grid& grid, const Array& a, const char* what) {
  if (static_cast<std::size_t>(a.size()) != grid.size()) {
    throw ConfigError(std::string(what) + " has " + std::to_string(a.size()) + " values, grid has " +
                      std::to_string(grid.size()));
  }
  std::vector<double> v(a.data(), a.data() + a.size());
  return ScalarField(grid, std::move(v));
}

Array to_array(const ScalarField& f) {
  const Grid& g = f.grid();
  std::vector<py::ssize_t> shape;
  if (g.dim() == 1) {
    shape = {static_cast<py::ssize_t>(g.counts()[0])};
  } else {
    shape = {static_cast<py::ssize_t>(g.counts()[1]), static_cast<py::ssize_t>(g.counts()[0])};
  }
  Array out(shape);
  std::memcpy(out.mutable_data(), f.values().data(), f.size() * sizeof(double));
  return out;
}

py::array_t<bool> mask_array(const NodeSet& s, const Grid& g) {
  std::vector<py::ssize_t> shape;
  if (g.dim() == 1) {
    shape = {static_cast<py::ssize_t>(g.counts()[0])};
  } else {
    shape = {static_cast<py::ssize_t>(g.counts()[1]), static_cast<py::ssize_t>(g.counts()[0])};
  }
  py::array_t<bool> out(shape);
  bool* d = out.mutable_data();
  for (std::size_t i = 0; i < g.size(); ++i) d[i] = s.contains(i);
  return out;
}

py::dict solve(const std::vector<double>& lo, const std::vector<double>& hi, const std::vector<int>& nodes, double p,
               std::optional<Array> obstacle, const Array& rhs, const Array& boundary, double outer_tol,
               double relaxation, int max_sweeps) {
  const Grid g = grid_from(lo, hi, nodes);
  std::optional<ScalarField> phi;
  if (obstacle) phi = field_from(g, *obstacle, "obstacle");
  const EllipticProblem prob =
      make_elliptic_problem(g, p, phi, field_from(g, rhs, "rhs"), field_from(g, boundary, "boundary"));
  SolverConfig cfg;
  cfg.outer_tol = outer_tol;
  cfg.relaxation = relaxation;
  cfg.max_sweeps = max_sweeps;
  EllipticSolution sol;
  {
    py::gil_scoped_release release;
    sol = solve_obstacle(prob, cfg);
  }
  py::dict out;
  out["u"] = to_array(sol.u);
  out["active"] = mask_array(sol.active, g);
  out["sweeps"] = sol.sweeps_used;
  out["converged"] = sol.converged;
  out["outer_tol"] = sol.outer_tol;
  out["residual_history"] = sol.residual_history;
  return out;
}

py::dict audit_dict(const AuditRecord& a) {
  py::dict d;
  d["name"] = a.name;
  d["constant_name"] = a.constant_name;
  d["p"] = a.p;
  d["dim"] = a.dim;
  d["audited"] = a.audited;
  d["analytic"] = a.analytic;
  d["printed"] = a.printed;
  d["relative_discrepancy"] = a.relative_discrepancy;
  d["analytic_agreement"] = a.analytic_agreement;
  d["ok"] = a.ok;
  d["message"] = a.message;
  return d;
}

}  // namespace

PYBIND11_MODULE(_plap, m) {
  m.doc() = "Obstacle problems for the p-Laplacian on uniform grids";
  m.attr("__version__") = cli::kVersion;

  // Later registrations are tried first, so the subclass goes last.
  py::register_exception<Error>(m, "PlapError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("solve_obstacle", &solve, py::arg("lo"), py::arg("hi"), py::arg("nodes"), py::arg("p"),
        py::arg("obstacle"), py::arg("rhs"), py::arg("boundary"), py::arg("outer_tol") = 0.0,
        py::arg("relaxation") = 1.0, py::arg("max_sweeps") = 100000,
        "Solve the elliptic obstacle problem. Arrays are shaped (n,) or (ny, nx).");

  m.def(
      "p_laplacian",
      [](const std::vector<double>& lo, const std::vector<double>& hi, const std::vector<int>& nodes,
         const Array& values, double p) {
        const Grid g = grid_from(lo, hi, nodes);
        return to_array(discrete_p_laplacian(field_from(g, values, "values"), p));
      },
      py::arg("lo"), py::arg("hi"), py::arg("nodes"), py::arg("values"), py::arg("p"));

  m.def(
      "residual_scan",
      [](const std::string& name, double p, int dim, const std::map<std::string, double>& params,
         std::optional<double> constant, int coarse_nodes, int levels) {
        const ExactSolution ex = catalog(name, p, dim, params, constant);
        const ResidualReport rep = residual_scan(ex, coarse_nodes, levels);
        py::list rows;
        for (const auto& l : rep.levels) rows.append(py::make_tuple(l.h, l.residual, l.rate));
        py::dict d;
        d["constant"] = rep.constant;
        d["levels"] = rows;
        d["min_rate"] = rep.min_rate;
        return d;
      },
      py::arg("name"), py::arg("p"), py::arg("dim"), py::arg("params") = std::map<std::string, double>{},
      py::arg("constant") = std::nullopt, py::arg("coarse_nodes") = 33, py::arg("levels") = 3);

  m.def(
      "constant_audit",
      [](const std::string& name, double p, int dim, const std::map<std::string, double>& params) {
        return audit_dict(constant_audit(name, p, dim, params));
      },
      py::arg("name"), py::arg("p"), py::arg("dim"), py::arg("params") = std::map<std::string, double>{});

  m.def(
      "exponent_catalog",
      [](double p) {
        const ExponentTriple e = exponent_catalog(p);
        return py::make_tuple(e.halfspace, e.zero_obstacle, e.source_type);
      },
      py::arg("p"));

  m.def(
      "evaluate",
      [](const std::string& text, std::optional<double> x, std::optional<double> y, std::optional<double> t) {
        return cli::eval_expression(cli::parse_expression(text), cli::Env{x, y, t});
      },
      py::arg("expression"), py::arg("x") = std::nullopt, py::arg("y") = std::nullopt, py::arg("t") = std::nullopt);

  m.def(
      "run_config_json",
      [](const std::filesystem::path& path, std::optional<std::filesystem::path> out_dir, bool write_files) {
        const cli::ExperimentConfig cfg = cli::load_config(path);
        cli::RunOptions opt;
        opt.out_dir = out_dir;
        opt.write_files = write_files;
        cli::RunResult r;
        {
          py::gil_scoped_release release;
          r = cli::run_experiment(cfg, opt);
        }
        return r.report.dump();
      },
      py::arg("path"), py::arg("out_dir") = std::nullopt, py::arg("write_files") = false,
      "Run an experiment config and return the report envelope as JSON text.");
}
