#include "hybridmc/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace hmc {

RunResult run_chain(const Scene& scene, const AdjointTable* adjoint, const ChainParams& params,
                    const RunOptions& options) {
  if (options.N == 0) throw std::invalid_argument("N must be positive");
  if (options.threads < 1) throw std::invalid_argument("threads must be at least 1");
  if (options.batches < 1) throw std::invalid_argument("batches must be at least 1");

  const std::uint64_t blocks = (options.N + kBlockPaths - 1) / kBlockPaths;
  const std::uint64_t groups = std::min<std::uint64_t>(static_cast<std::uint64_t>(options.batches), blocks);
  std::vector<Tally> tallies(blocks);
  std::vector<std::vector<Path>> traces(blocks);
  std::atomic<std::uint64_t> next_group{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    try {
      Transport transport(scene, adjoint, params);
      Path path;
      for (;;) {
        const std::uint64_t g = next_group.fetch_add(1);
        if (g >= groups) return;
        const std::uint64_t b0 = g * blocks / groups, b1 = (g + 1) * blocks / groups;
        for (std::uint64_t b = b0; b < b1; ++b) {
          Rng rng = block_stream(options.master_seed, b);
          const std::uint64_t first = b * kBlockPaths;
          const std::uint64_t last = std::min(options.N, first + kBlockPaths);
          Tally& t = tallies[b];
          for (std::uint64_t i = first; i < last; ++i) {
            transport.run(rng, path);
            t.add(path);
            if (i < options.trace_cap) traces[b].push_back(path);
          }
        }
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next_group = groups;
    }
  };

  const auto t0 = std::chrono::steady_clock::now();
  const int nthreads = static_cast<int>(std::min<std::uint64_t>(static_cast<std::uint64_t>(options.threads), groups));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < nthreads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  RunResult result;
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (failure) std::rethrow_exception(failure);

  for (std::uint64_t b = 0; b < blocks; ++b) {
    result.tally = merge(result.tally, tallies[b]);
    for (auto& p : traces[b]) result.traces.push_back(std::move(p));
  }
  result.tau = result.seconds / static_cast<double>(options.N);
  return result;
}

}  // namespace hmc
