#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plap/cli/config.hpp"
#include "plap/mesh.hpp"

namespace plap::cli {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int { kPass = 0, kCheckFailed = 1, kInvalidConfig = 2, kNonConvergence = 3 };

struct RunOptions {
  /// Overrides output.dir from the config.
  std::optional<std::filesystem::path> out_dir;
  int threads = 1;
  std::uint64_t seed = 0;
  bool write_files = true;
};

struct RunResult {
  nlohmann::json report;
  int exit_code = kPass;
  std::filesystem::path out_dir;
};

/// Runs the pipeline selected by `config.kind`, writes report.json plus the
/// pipeline's CSV files, and returns the envelope. Configuration problems
/// found while building fields (e.g. an expression failing to evaluate)
/// raise ConfigError; everything else is folded into the exit code.
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Envelope for a run that never reached a pipeline (invalid configuration).
nlohmann::json error_report(const std::string& message, int exit_code);

struct ConvergenceRow {
  int nodes = 0;
  double h = 0.0;
  double error = 0.0;
  /// Against the previous level; NaN on the first row or when not meaningful.
  double rate = 0.0;
  bool converged = false;
  /// False when the errors are at solver-tolerance level.
  bool meaningful = true;
};

/// Solves the configured elliptic problem at nodes n0, 2(n0-1)+1, ... and
/// measures the max-norm error against data.exact or a projected SOR solve.
std::vector<ConvergenceRow> convergence_study(const ExperimentConfig& config, int levels);

/// Independent p = 2 reference: projected SOR on the five-point stencil that
/// the P1 triangulation produces, with lumped right-hand side. Iterates until
/// the largest update falls below `tol`.
ScalarField projected_sor(const Grid& grid, const std::optional<ScalarField>& obstacle,
                          const ScalarField& rhs, const ScalarField& boundary, double omega,
                          double tol = 1e-14, int max_sweeps = 1000000);

/// Magic "PLAP1", then dim and the node counts as little-endian uint32, then
/// the nodal values as little-endian IEEE doubles in lexicographic order.
void write_solution_bin(const std::filesystem::path& path, const ScalarField& field);
ScalarField read_solution_bin(const std::filesystem::path& path, const Domain& domain);

/// Locale-independent CSV writer with LF line endings.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

/// Default over-relaxation for a grid: 2 / (1 + sin(pi / (n - 1))).
double auto_relaxation(const Grid& grid);

}  // namespace plap::cli
