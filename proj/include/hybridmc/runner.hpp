#pragma once

#include "hybridmc/estimators.hpp"
#include "hybridmc/transport.hpp"

#include <cstdint>
#include <vector>

namespace hmc {

/// Paths per work block. Each block owns the stream block_stream(seed, index),
/// so results do not depend on how blocks are spread over threads.
inline constexpr std::uint64_t kBlockPaths = 4096;

struct RunOptions {
  std::uint64_t N = 1000000;
  std::uint64_t master_seed = 1;
  int threads = 1;
  int batches = 1;           // contiguous groups of blocks handed to workers
  std::size_t trace_cap = 0; // number of leading paths to keep
};

struct RunResult {
  Tally tally;
  double seconds = 0.0;
  double tau = 0.0;  // seconds per path
  std::vector<Path> traces;
};

RunResult run_chain(const Scene& scene, const AdjointTable* adjoint, const ChainParams& params,
                    const RunOptions& options);

}  // namespace hmc
