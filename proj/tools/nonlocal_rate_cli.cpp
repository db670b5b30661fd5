// nonlocal-rate <experiment> --config <path> [--out <dir>] [--seed <u64>] [--threads <n>]

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "nonlocal_rate/experiments.hpp"

int main(int argc, char** argv) {
  using namespace nonlocal_rate;
  CLI::App app{"Nonlocal rate-functional experiments"};
  std::string experiment, config_path, out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("experiment", experiment, "rate1d, ratend, slice-check, kernel-report, h2-probe or bounds-audit")
      ->required();
  app.add_option("--config", config_path, "experiment config file")->required();
  auto* out_opt = app.add_option("--out", out_dir, "output directory (default: [output] dir, else ./out)");
  auto* seed_opt = app.add_option("--seed", seed, "RNG seed for Monte Carlo backends");
  auto* threads_opt =
      app.add_option("--threads", threads, "worker threads (default: NONLOCAL_RATE_THREADS, else 1)")->check(CLI::PositiveNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_ok : exit_invalid;
  }

  try {
    ExperimentConfig c = parse_config(IniFile::load(config_path));
    if (!c.experiment.empty() && c.experiment != experiment)
      throw ConfigError("config names experiment '" + c.experiment + "' but '" + experiment + "' was requested");
    c.experiment = experiment;
    c.source = config_path;
    if (*out_opt) c.output_dir = out_dir;
    if (*seed_opt) c.seed = seed;
    if (c.seed) c.quadrature.seed = *c.seed;
    if (*threads_opt) c.quadrature.threads = threads;
    const RunResult r = run(c);
    std::cout << r.experiment << ": wrote " << (c.output_dir / "report.csv").string() << ", report.json, plot.svg\n";
    if (r.exit_code != exit_ok) std::cerr << r.message << '\n';
    return r.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_invalid;
  } catch (const QuadratureError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return exit_numerical_failure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_numerical_failure;
  }
}
