#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "plap/cli/config.hpp"
#include "plap/cli/runner.hpp"
#include "plap/errors.hpp"

namespace {

struct Common {
  std::string config;
  std::string out;
  int threads = 1;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "Experiment configuration (JSON)")->required();
  sub->add_option("--out", c.out, "Output directory (overrides output.dir)");
  sub->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--seed", c.seed, "Seed for randomized property checks; never affects solutions");
}

void write_failure(const Common& c, const nlohmann::json& report) {
  if (c.out.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(c.out, ec);
  std::ofstream f(std::filesystem::path(c.out) / "report.json", std::ios::binary);
  if (f) f << report.dump(2) << '\n';
}

int run(plap::cli::Kind kind, const Common& c) {
  using namespace plap::cli;
  try {
    const ExperimentConfig cfg = load_config(c.config, kind);
    RunOptions opt;
    if (!c.out.empty()) opt.out_dir = c.out;
    opt.threads = c.threads;
    opt.seed = c.seed;
    const RunResult res = run_experiment(cfg, opt);
    std::cout << to_string(cfg.kind) << ": " << res.report["status"].get<std::string>() << " (exit "
              << res.exit_code << ")\n";
    for (const auto& chk : res.report["checks"]) {
      std::cout << "  " << (chk["passed"].get<bool>() ? "ok   " : "FAIL ") << chk["name"].get<std::string>()
                << "  value=" << chk["value"].dump() << "  tol=" << chk["tolerance"].dump();
      if (!chk["detail"].get<std::string>().empty()) std::cout << "  (" << chk["detail"].get<std::string>() << ")";
      std::cout << '\n';
    }
    std::cout << "report: " << (res.out_dir / "report.json").string() << '\n';
    return res.exit_code;
  } catch (const plap::ConfigError& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    write_failure(c, error_report(e.what(), kInvalidConfig));
    return kInvalidConfig;
  } catch (const plap::PreconditionError& e) {
    std::cerr << "hypothesis not met: " << e.what() << '\n';
    write_failure(c, error_report(e.what(), kInvalidConfig));
    return kInvalidConfig;
  } catch (const plap::NumericalError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    write_failure(c, error_report(e.what(), kNonConvergence));
    return kNonConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    write_failure(c, error_report(e.what(), kCheckFailed));
    return kCheckFailed;
  }
}

}  // namespace

int main(int argc, char** argv) {
  using plap::cli::Kind;
  CLI::App app{"Obstacle problems for the p-Laplacian: solvers, free-boundary measurements, oracles"};
  app.require_subcommand(1);
  app.set_version_flag("--version", plap::cli::kVersion);

  const std::pair<const char*, Kind> commands[] = {
      {"solve", Kind::elliptic},     {"parabolic", Kind::parabolic}, {"growth", Kind::growth},
      {"nondeg", Kind::nondeg},      {"porosity", Kind::porosity},   {"oracle", Kind::oracle},
      {"audit", Kind::audit},        {"convergence", Kind::convergence},
  };
  const char* help[] = {
      "Solve an elliptic obstacle problem",
      "Solve a parabolic obstacle problem and measure its time-Lipschitz constant",
      "Measure the growth exponent at a free-boundary point",
      "Measure non-degeneracy of u - phi near the free boundary",
      "Measure the porosity of the free boundary",
      "Residual refinement study of a closed-form solution",
      "Determine a closed-form solution's constant from its residual",
      "Refinement study of an elliptic problem against a reference",
  };
  Common common;
  Kind selected = Kind::elliptic;
  for (std::size_t k = 0; k < std::size(commands); ++k) {
    CLI::App* sub = app.add_subcommand(commands[k].first, help[k]);
    add_common(sub, common);
    const Kind kind = commands[k].second;
    sub->callback([&selected, kind] { selected = kind; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : plap::cli::kInvalidConfig;
  }
  return run(selected, common);
}
