#include "hmmkit/simulate.hpp"

#include <string>

namespace hmmkit {

namespace {

std::discrete_distribution<int> row_distribution(const Eigen::VectorXd& p) {
  return std::discrete_distribution<int>(p.data(), p.data() + p.size());
}

}  // namespace

SimulatedSeries simulate(const NaturalParams& n, std::size_t T, std::mt19937_64& rng) {
  n.validate();
  if (T == 0) throw ArgumentError("series length must be at least 1");
  const int m = n.states();
  std::discrete_distribution<int> initial = row_distribution(n.delta);
  std::vector<std::discrete_distribution<int>> rows;
  rows.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) rows.push_back(row_distribution(n.gamma.row(i).transpose()));

  SimulatedSeries out;
  out.states.resize(T);
  std::vector<double> x(T);
  int c = initial(rng);
  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0) c = rows[static_cast<std::size_t>(c)](rng);
    out.states[t] = c;
    if (n.family == Family::Poisson) {
      x[t] = std::poisson_distribution<long long>(n.lambda[c])(rng);
    } else {
      x[t] = std::normal_distribution<double>(n.mu[c], n.sigma[c])(rng);
    }
  }
  out.obs = ObservationSeries(std::move(x));
  return out;
}

SimulatedSeries simulate(const NaturalParams& n, std::size_t T, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return simulate(n, T, rng);
}

bool all_states_visited(const std::vector<int>& path, int m) {
  std::vector<bool> seen(static_cast<std::size_t>(m), false);
  int count = 0;
  for (int s : path) {
    if (s >= 0 && s < m && !seen[static_cast<std::size_t>(s)]) {
      seen[static_cast<std::size_t>(s)] = true;
      ++count;
    }
  }
  return count == m;
}

SimulatedSeries simulate_visiting_all(const NaturalParams& n, std::size_t T, std::mt19937_64& rng, int max_draws) {
  for (int k = 0; k < max_draws; ++k) {
    SimulatedSeries s = simulate(n, T, rng);
    if (all_states_visited(s.states, n.states())) return s;
  }
  throw StudyDegenerate("no simulated path of length " + std::to_string(T) + " visited all " +
                        std::to_string(n.states()) + " states in " + std::to_string(max_draws) + " draws");
}

}  // namespace hmmkit
