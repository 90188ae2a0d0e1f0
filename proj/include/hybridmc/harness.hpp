#pragma once

#include "hybridmc/adjoint.hpp"
#include "hybridmc/estimators.hpp"
#include "hybridmc/runner.hpp"
#include "hybridmc/scene.hpp"
#include "hybridmc/transport.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode : int { kOk = 0, kConfigError = 1, kNumericalFailure = 2, kPartialSweep = 3 };

struct RunConfig {
  SceneSpec scene;

  ChainParams chain;
  std::uint64_t N = 1000000;
  std::uint64_t master_seed = 1;
  int batches = 1;
  int threads = 1;

  std::vector<double> sweep_h, sweep_mfp, sweep_q_s, sweep_q_v, sweep_m;
  std::vector<ChainKind> sweep_chains;

  std::filesystem::path out_dir = "out";
  std::size_t trace_cap = 0;

  std::optional<double> fom_C;          // seconds; calibrated when absent
  double fom_rel_eps = 0.01;            // target rms error relative to the benchmark mean
  std::vector<double> calibrate_h{0.1, 0.05};

  AdjointOptions adjoint;

  bool sweep_empty() const {
    return sweep_h.empty() && sweep_mfp.empty() && sweep_q_s.empty() && sweep_q_v.empty() &&
           sweep_m.empty() && sweep_chains.empty();
  }
  /// Throws ConfigError on any value outside its module's preconditions.
  void validate() const;
};

/// INI text with sections [scene], [chain], [sweep], [output], [fom], [adjoint].
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

/// Comma-separated numbers; "inf" is accepted.
std::vector<double> parse_list(const std::string& text);

Scene make_scene(const RunConfig& cfg);
RunOptions run_options(const RunConfig& cfg);

FomReport make_report(const RunConfig& cfg, const Tally& tally, double tau, double t0, double m);

// Subcommands. Each writes into cfg.out_dir and returns an exit code; numerical
// failures propagate as exceptions.
int cmd_solve_adjoint(const RunConfig& cfg);
int cmd_run(const RunConfig& cfg);
int cmd_sweep(const RunConfig& cfg);
int cmd_calibrate(const RunConfig& cfg);

/// Formats x the way the CSV and plot file names do.
std::string format_value(double x);

}  // namespace hmc
