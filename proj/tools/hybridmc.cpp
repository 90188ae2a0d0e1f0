#include "hybridmc/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Hybrid adjoint/Monte Carlo radiative transfer"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "INI configuration file")->required();
    sub->add_option("--out", out_dir, "output directory (overrides [output] dir)");
    sub->add_option("--seed", seed, "master seed (overrides [chain] master_seed)");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  };
  CLI::App* solve = app.add_subcommand("solve-adjoint", "assemble and solve the surface adjoint");
  CLI::App* run = app.add_subcommand("run", "run one chain at one parameter point");
  CLI::App* sweep = app.add_subcommand("sweep", "Cartesian sweep over the [sweep] lists");
  CLI::App* calibrate = app.add_subcommand("calibrate", "fit the deterministic cost constant C");
  for (CLI::App* sub : {solve, run, sweep, calibrate}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? hmc::kOk : hmc::kConfigError;
  }

  hmc::RunConfig cfg;
  try {
    cfg = hmc::load_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!app.get_subcommands().front()->get_option("--seed")->empty()) cfg.master_seed = seed;
    if (threads > 0) cfg.threads = threads;
    cfg.validate();
  } catch (const hmc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return hmc::kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return hmc::kConfigError;
  }

  try {
    if (solve->parsed()) return hmc::cmd_solve_adjoint(cfg);
    if (run->parsed()) return hmc::cmd_run(cfg);
    if (sweep->parsed()) return hmc::cmd_sweep(cfg);
    return hmc::cmd_calibrate(cfg);
  } catch (const hmc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return hmc::kConfigError;
  } catch (const hmc::NonConvergence& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return hmc::kNumericalFailure;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return hmc::kNumericalFailure;
  }
}
