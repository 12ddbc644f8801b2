#include "hmmkit/likelihood.hpp"

#include <string>

namespace hmmkit {

void ObservationSeries::validate(Family family) const {
  if (values.empty()) throw DimensionError("observation series is empty");
  for (std::size_t t = 0; t < values.size(); ++t) {
    const double x = values[t];
    if (!std::isfinite(x)) {
      throw DomainError("observation " + std::to_string(t + 1) + " is not finite");
    }
    if (family == Family::Poisson && (x < 0.0 || x != std::floor(x))) {
      throw DomainError("observation " + std::to_string(t + 1) + " (" + std::to_string(x) +
                        ") is outside the Poisson support");
    }
  }
}

double nll(const WorkingParams& w, const ObservationSeries& obs, const EmissionSpec& spec) {
  obs.validate(spec.family);
  return kernels::negative_log_likelihood(w.span(), obs, spec);
}

double log_density(const NaturalParams& n, int state, double x) {
  if (n.family == Family::Poisson) {
    const double lambda = n.lambda[state];
    return (x == 0.0 ? 0.0 : x * std::log(lambda)) - lambda - std::lgamma(x + 1.0);
  }
  const double z = (x - n.mu[state]) / n.sigma[state];
  return -kernels::kHalfLog2Pi - std::log(n.sigma[state]) - 0.5 * z * z;
}

namespace {

struct LogTables {
  std::vector<double> log_g;
  std::vector<double> log_d;
  std::vector<double> log_e;
};

LogTables log_tables(const NaturalParams& n, const ObservationSeries& obs) {
  const auto m = static_cast<std::size_t>(n.states());
  const std::size_t T = obs.size();
  LogTables tab;
  tab.log_g.resize(m * m);
  tab.log_d.resize(m);
  tab.log_e.resize(T * m);
  for (std::size_t i = 0; i < m; ++i) {
    tab.log_d[i] = std::log(n.delta[static_cast<Eigen::Index>(i)]);
    for (std::size_t j = 0; j < m; ++j) {
      tab.log_g[i * m + j] = std::log(n.gamma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
  }
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < m; ++j) tab.log_e[t * m + j] = log_density(n, static_cast<int>(j), obs[t]);
  }
  return tab;
}

}  // namespace

ForwardBackwardCache forward_backward(const NaturalParams& n, const ObservationSeries& obs) {
  n.validate();
  obs.validate(n.family);
  const auto m = static_cast<std::size_t>(n.states());
  const std::size_t T = obs.size();
  const LogTables tab = log_tables(n, obs);
  const auto rec = kernels::scaled_recursions(tab.log_g, tab.log_d, tab.log_e, m, T);

  ForwardBackwardCache cache;
  cache.log_alpha.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(T));
  cache.log_beta.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(T));
  double cum = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    cum += rec.forward_scale[t];
    for (std::size_t i = 0; i < m; ++i) {
      cache.log_alpha(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = rec.phi[t * m + i] + cum;
    }
  }
  cache.log_likelihood = cum;
  double tail = 0.0;
  for (std::size_t t = T; t-- > 0;) {
    tail += rec.backward_scale[t];
    for (std::size_t i = 0; i < m; ++i) {
      cache.log_beta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = rec.psi[t * m + i] + tail;
    }
  }
  return cache;
}

double brute_force_likelihood(const NaturalParams& n, const ObservationSeries& obs) {
  n.validate();
  obs.validate(n.family);
  const auto m = static_cast<std::size_t>(n.states());
  const std::size_t T = obs.size();
  double count = 1.0;
  for (std::size_t t = 0; t < T; ++t) {
    count *= static_cast<double>(m);
    if (count > 1e7) {
      throw SizeError("brute-force enumeration needs m^T <= 1e7 (m=" + std::to_string(m) +
                      ", T=" + std::to_string(T) + ")");
    }
  }
  std::vector<double> dens(T * m);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < m; ++j) dens[t * m + j] = std::exp(log_density(n, static_cast<int>(j), obs[t]));

  std::vector<std::size_t> path(T, 0);
  double total = 0.0;
  for (;;) {
    double p = n.delta[static_cast<Eigen::Index>(path[0])] * dens[path[0]];
    for (std::size_t t = 1; t < T; ++t) {
      p *= n.gamma(static_cast<Eigen::Index>(path[t - 1]), static_cast<Eigen::Index>(path[t])) * dens[t * m + path[t]];
    }
    total += p;
    std::size_t pos = 0;
    while (pos < T && ++path[pos] == m) path[pos++] = 0;
    if (pos == T) break;
  }
  return total;
}

}  // namespace hmmkit
