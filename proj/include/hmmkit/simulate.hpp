#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "hmmkit/likelihood.hpp"
#include "hmmkit/params.hpp"

namespace hmmkit {

struct SimulatedSeries {
  ObservationSeries obs;
  std::vector<int> states;  ///< zero-based hidden state path
};

/// C_1 ~ delta, C_t | C_{t-1} ~ row of Gamma, X_t from the state's emission.
SimulatedSeries simulate(const NaturalParams& n, std::size_t T, std::mt19937_64& rng);
SimulatedSeries simulate(const NaturalParams& n, std::size_t T, std::uint64_t seed);

bool all_states_visited(const std::vector<int>& path, int m);

/// Redraws until every state appears in the path; gives up after max_draws.
SimulatedSeries simulate_visiting_all(const NaturalParams& n, std::size_t T, std::mt19937_64& rng,
                                      int max_draws = 1000);

}  // namespace hmmkit
