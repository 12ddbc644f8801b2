#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "hmmkit/ad.hpp"
#include "hmmkit/params.hpp"

namespace hmmkit {

struct ObservationSeries {
  std::vector<double> values;

  ObservationSeries() = default;
  explicit ObservationSeries(std::vector<double> v) : values(std::move(v)) {}

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t t) const { return values[t]; }

  /// T >= 1, no NaN/inf; for Poisson every value is a nonnegative integer.
  void validate(Family family) const;
};

struct ForwardBackwardCache {
  Eigen::MatrixXd log_alpha;  ///< m x T, log alpha_t(i)
  Eigen::MatrixXd log_beta;   ///< m x T, log beta_t(i); last column is zero
  double log_likelihood = 0.0;
};

/// Negative log-likelihood from the scaled (log-space) forward recursion.
double nll(const WorkingParams& w, const ObservationSeries& obs, const EmissionSpec& spec);

ForwardBackwardCache forward_backward(const NaturalParams& n, const ObservationSeries& obs);

/// Sum over every state sequence; requires m^T <= 1e7.
double brute_force_likelihood(const NaturalParams& n, const ObservationSeries& obs);

/// log p_i(x) under the natural parameters.
double log_density(const NaturalParams& n, int state, double x);

namespace kernels {

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2*pi)

/// log p_j(x_t) for all t, j as a T x m row-major table.
template <class S>
std::vector<S> log_emissions(std::span<const S> w, const ObservationSeries& obs, const EmissionSpec& spec) {
  using std::exp;
  const std::size_t m = check_working(w, spec);
  const std::size_t off = m * (m - 1);
  const std::size_t T = obs.size();
  std::vector<S> out(T * m);
  if (spec.family == Family::Poisson) {
    std::vector<S> rate(m);
    for (std::size_t j = 0; j < m; ++j) rate[j] = exp(w[off + j]);
    for (std::size_t t = 0; t < T; ++t) {
      const double x = obs[t];
      const double log_fact = std::lgamma(x + 1.0);
      for (std::size_t j = 0; j < m; ++j) {
        // x * log(lambda) - lambda - log(x!), with log(lambda) the working entry
        out[t * m + j] = (x == 0.0 ? S(0.0) : x * w[off + j]) - rate[j] - log_fact;
      }
    }
  } else {
    std::vector<S> inv_sd(m);
    for (std::size_t j = 0; j < m; ++j) inv_sd[j] = exp(-w[off + m + j]);
    for (std::size_t t = 0; t < T; ++t) {
      const double x = obs[t];
      for (std::size_t j = 0; j < m; ++j) {
        const S z = (x - w[off + j]) * inv_sd[j];
        out[t * m + j] = -kHalfLog2Pi - w[off + m + j] - 0.5 * (z * z);
      }
    }
  }
  return out;
}

/// log(delta) for the stationary distribution of the TPM implied by w.
template <class S>
std::vector<S> log_stationary(std::span<const S> w, const EmissionSpec& spec) {
  using std::log;
  const auto m = static_cast<std::size_t>(spec.m);
  const std::vector<S> d = stationary(tpm(w, spec), m);
  std::vector<S> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = log(d[i]);
  return out;
}

/// Scaled forward recursion in log space. Each step is renormalized by its
/// log-sum-exp, and the normalizers accumulate into the log-likelihood.
template <class S>
S negative_log_likelihood(std::span<const S> w, const ObservationSeries& obs, const EmissionSpec& spec) {
  const auto m = static_cast<std::size_t>(spec.m);
  const std::size_t T = obs.size();
  const std::vector<S> log_g = log_tpm(w, spec);
  const std::vector<S> log_e = log_emissions(w, obs, spec);
  const std::vector<S> log_d = log_stationary(w, spec);

  std::vector<S> phi(m);
  std::vector<S> next(m);
  std::vector<S> terms(m);
  for (std::size_t j = 0; j < m; ++j) phi[j] = log_d[j] + log_e[j];
  S scale = logsumexp(phi);
  S ll = scale;
  for (std::size_t j = 0; j < m; ++j) phi[j] = phi[j] - scale;
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < m; ++i) terms[i] = phi[i] + log_g[i * m + j];
      next[j] = logsumexp(terms) + log_e[t * m + j];
    }
    scale = logsumexp(next);
    ll = ll + scale;
    for (std::size_t j = 0; j < m; ++j) phi[j] = next[j] - scale;
  }
  return -ll;
}

/// Normalized forward (phi) and backward (psi) log variables plus their
/// per-step log normalizers; log alpha_t = phi_t + sum_{s<=t} c_s and
/// log beta_t = psi_t + sum_{s>=t} d_s. Tables are T x m row-major.
template <class S>
struct ScaledRecursions {
  std::vector<S> phi;
  std::vector<S> psi;
  std::vector<S> forward_scale;   ///< c_t
  std::vector<S> backward_scale;  ///< d_t, with d_T = 0
};

template <class S>
ScaledRecursions<S> scaled_recursions(const std::vector<S>& log_g, const std::vector<S>& log_d,
                                      const std::vector<S>& log_e, std::size_t m, std::size_t T) {
  ScaledRecursions<S> r;
  r.phi.resize(T * m);
  r.psi.resize(T * m);
  r.forward_scale.resize(T);
  r.backward_scale.assign(T, S(0.0));
  std::vector<S> cur(m);
  std::vector<S> terms(m);

  for (std::size_t j = 0; j < m; ++j) cur[j] = log_d[j] + log_e[j];
  for (std::size_t t = 0;; ++t) {
    const S c = logsumexp(cur);
    r.forward_scale[t] = c;
    for (std::size_t j = 0; j < m; ++j) r.phi[t * m + j] = cur[j] - c;
    if (t + 1 == T) break;
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < m; ++i) terms[i] = r.phi[t * m + i] + log_g[i * m + j];
      cur[j] = logsumexp(terms) + log_e[(t + 1) * m + j];
    }
  }

  for (std::size_t i = 0; i < m; ++i) r.psi[(T - 1) * m + i] = S(0.0);
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) terms[j] = log_g[i * m + j] + log_e[(t + 1) * m + j] + r.psi[(t + 1) * m + j];
      cur[i] = logsumexp(terms);
    }
    const S d = logsumexp(cur);
    r.backward_scale[t] = d;
    for (std::size_t i = 0; i < m; ++i) r.psi[t * m + i] = cur[i] - d;
  }
  return r;
}

/// Smoothing probabilities P(C_t = i | x) as a T x m row-major table.
template <class S>
std::vector<S> smoothing(std::span<const S> w, const ObservationSeries& obs, const EmissionSpec& spec) {
  using std::exp;
  const auto m = static_cast<std::size_t>(spec.m);
  const std::size_t T = obs.size();
  const auto rec = scaled_recursions(log_tpm(w, spec), log_stationary(w, spec), log_emissions(w, obs, spec), m, T);
  std::vector<S> out(T * m);
  std::vector<S> joint(m);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < m; ++i) joint[i] = rec.phi[t * m + i] + rec.psi[t * m + i];
    const S norm = logsumexp(joint);
    for (std::size_t i = 0; i < m; ++i) out[t * m + i] = exp(joint[i] - norm);
  }
  return out;
}

}  // namespace kernels

/// The nll over working parameters as a differentiable function. The series
/// is copied in; evaluations are independent and thread-safe.
inline auto make_nll_function(const ObservationSeries& obs, const EmissionSpec& spec) {
  obs.validate(spec.family);
  return ad::make_function(spec.working_size(), [obs, spec](auto w) {
    return kernels::negative_log_likelihood(w, obs, spec);
  });
}

}  // namespace hmmkit
