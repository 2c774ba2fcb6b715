#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "plap/cli/expression.hpp"
#include "plap/elliptic.hpp"
#include "plap/mesh.hpp"

namespace plap::cli {

enum class Kind { elliptic, parabolic, oracle, audit, growth, nondeg, porosity, convergence };

std::string to_string(Kind kind);
Kind kind_from_string(const std::string& name);

/// A data field given as text in the expression language.
struct FieldExpr {
  std::string text;
  Expression ast;
};

struct ObstacleSpec {
  std::optional<FieldExpr> expression;
  std::string preset;
  std::map<std::string, double> params;
};

struct GridSpec {
  int dim = 2;
  Point lo{-1.0, -1.0};
  Point hi{1.0, 1.0};
  std::array<int, 2> nodes{0, 0};
};

struct DataSpec {
  std::optional<ObstacleSpec> obstacle;
  /// Declared Hoelder exponent of grad phi for expression obstacles.
  std::optional<double> beta;
  FieldExpr rhs;
  std::optional<FieldExpr> boundary;
  std::optional<FieldExpr> initial;
  std::optional<FieldExpr> exact;
};

struct TimeSpec {
  double horizon = 0.0;
  double dt = 0.0;  ///< 0 selects dt = h
};

struct SolverSpec {
  SolverConfig config;
  /// Empty means "auto": 2 / (1 + sin(pi / (n - 1))) on the finest axis.
  std::optional<double> relaxation;
};

struct MeasurementSpec {
  Point anchor{0.0, 0.0};
  int radii_count = 4;
  double r_max = 0.5;
  double min_cells = 8.0;
  std::optional<std::string> gradient;  ///< "analytic" or "numeric"
  std::optional<double> expected_exponent;
  double slope_tolerance = 0.15;
  double blowup_factor = 3.0;
  double shell_half_width = 0.0;  ///< 0 selects h
  double ratio_floor = 0.1;
  int points = 8;
  std::vector<double> porosity_cells{8.0, 16.0, 32.0};
  double density_max = 0.95;
  std::optional<double> slice_time;
  double lipschitz_tol = 0.05;
};

struct OracleSpec {
  std::string name;
  std::optional<int> dim;
  std::map<std::string, double> params;
  /// "audited", "printed", or a literal value.
  std::variant<std::string, double> constant = std::string("audited");
  double perturbation = 0.0;
  int coarse_nodes = 0;
  int levels = 3;
  double min_rate = 0.8;
  std::optional<double> margin;
  int audit_nodes = 0;
  double audit_tol = 1e-3;
};

struct ConvergenceSpec {
  int levels = 3;
  std::string reference = "exact";  ///< "exact" or "psor"
  double min_rate = 0.8;
};

struct OutputSpec {
  std::string dir = "out";
  bool solution_bin = false;
};

struct ExperimentConfig {
  Kind kind = Kind::elliptic;
  std::optional<GridSpec> grid;
  double p = 2.0;
  DataSpec data;
  std::optional<TimeSpec> time;
  SolverSpec solver;
  MeasurementSpec measurement;
  std::optional<OracleSpec> oracle;
  ConvergenceSpec convergence;
  OutputSpec output;
  /// Normalized echo with defaults filled; the digest is computed from it.
  nlohmann::json canonical;
};

/// Parses and validates. Every error is a ConfigError whose message starts
/// with the JSON path of the offending field (e.g. "$.solver.relaxation").
ExperimentConfig parse_config(const nlohmann::json& doc, std::optional<Kind> forced_kind = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<Kind> forced_kind = std::nullopt);

/// 64-bit FNV-1a of the canonical (sorted-key, compact) serialization, in hex.
std::string config_digest(const nlohmann::json& canonical);

Grid make_grid(const GridSpec& spec);

}  // namespace plap::cli
