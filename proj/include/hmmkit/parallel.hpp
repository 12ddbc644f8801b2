#pragma once

#include <cstdint>
#include <random>

namespace hmmkit {

/// Worker count for parallel loops: OpenMP's default, capped by the
/// HMMKIT_THREADS environment variable when it holds a positive integer.
int worker_count();

/// Independent generator for replication `index` of a run seeded with `seed`.
/// Results depend only on (seed, index), never on scheduling.
inline std::mt19937_64 replication_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace hmmkit
