#pragma once

#include <cstdint>
#include <random>

namespace hmc {

using Rng = std::mt19937_64;

/// Uniform on [0, 1).
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform on the open interval (0, 1).
inline double uniform_open(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Independent stream for work block `block` of a run seeded with `master`.
inline Rng block_stream(std::uint64_t master, std::uint64_t block) {
  const std::uint64_t key = master ^ block;
  std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32),
                    static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32)};
  return Rng(seq);
}

}  // namespace hmc
