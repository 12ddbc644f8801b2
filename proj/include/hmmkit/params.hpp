#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hmmkit/ad.hpp"
#include "hmmkit/errors.hpp"

namespace hmmkit {

enum class Family { Poisson, Gaussian };

std::string to_string(Family family);
Family family_from_string(const std::string& name);

struct EmissionSpec {
  Family family = Family::Poisson;
  int m = 1;

  EmissionSpec() = default;
  EmissionSpec(Family f, int states);

  /// m(m-1) off-diagonal logits plus m (Poisson) or 2m (Gaussian) emission entries.
  std::size_t working_size() const;
  /// Emission entries, then the full m x m TPM row-major, then delta.
  std::size_t natural_size() const;
  /// Free parameters counted by AIC/BIC.
  std::size_t free_parameters() const { return working_size(); }
  std::size_t emission_size() const { return family == Family::Poisson ? m : 2 * m; }

  bool operator==(const EmissionSpec&) const = default;
};

/// Constrained parameters. For Poisson models `lambda` is populated, for
/// Gaussian models `mu` and `sigma`.
struct NaturalParams {
  Family family = Family::Poisson;
  Eigen::MatrixXd gamma;
  Eigen::VectorXd lambda;
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;
  Eigen::VectorXd delta;

  static NaturalParams poisson(const Eigen::MatrixXd& gamma, const Eigen::VectorXd& lambda);
  static NaturalParams gaussian(const Eigen::MatrixXd& gamma, const Eigen::VectorXd& mu,
                                const Eigen::VectorXd& sigma);

  int states() const { return static_cast<int>(gamma.rows()); }
  EmissionSpec spec() const { return {family, states()}; }

  /// Location parameter used for the ordering convention (lambda or mu).
  const Eigen::VectorXd& location() const { return family == Family::Poisson ? lambda : mu; }

  /// Throws DomainError/DimensionError if any invariant is violated.
  void validate() const;

  Eigen::VectorXd flatten() const;
  std::vector<std::string> names() const;
};

/// Unconstrained vector: off-diagonal logits tau_ij row-major, then log(lambda)
/// or mu followed by log(sigma).
struct WorkingParams {
  Eigen::VectorXd values;

  WorkingParams() = default;
  explicit WorkingParams(Eigen::VectorXd v) : values(std::move(v)) {}
  std::span<const double> span() const { return {values.data(), static_cast<std::size_t>(values.size())}; }
};

NaturalParams natural_from_working(const WorkingParams& w, const EmissionSpec& spec);
WorkingParams working_from_natural(const NaturalParams& n, const EmissionSpec& spec);

/// Solves (I - Gamma + U)^T delta^T = 1 with U the all-ones matrix.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& gamma);

/// Permutation p such that location()[p[0]] <= location()[p[1]] <= ...
std::vector<int> sort_permutation(const NaturalParams& n);
/// New state k is old state perm[k].
NaturalParams permute_states(const NaturalParams& n, const std::vector<int>& perm);
WorkingParams permute_states(const WorkingParams& w, const EmissionSpec& spec,
                             const std::vector<int>& perm);
NaturalParams sort_states(const NaturalParams& n);

// ---------------------------------------------------------------------------
// Generic kernels over any AD scalar. These back both the plain and the
// differentiated code paths.

namespace kernels {

using ad::logsumexp;
using ad::value_of;

template <class S>
std::size_t check_working(std::span<const S> w, const EmissionSpec& spec) {
  if (w.size() != spec.working_size()) {
    throw DimensionError("working vector has length " + std::to_string(w.size()) + ", expected " +
                         std::to_string(spec.working_size()));
  }
  return static_cast<std::size_t>(spec.m);
}

/// log(Gamma) row-major from the logits. Each row is normalized by a fused
/// log-sum-exp (max-shifted), so every finite working vector maps to a valid TPM.
template <class S>
std::vector<S> log_tpm(std::span<const S> w, const EmissionSpec& spec) {
  const std::size_t m = check_working(w, spec);
  std::vector<S> out(m * m);
  std::vector<S> row(m);
  std::size_t k = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) row[j] = (i == j) ? S(0.0) : w[k++];
    const S lse = logsumexp(row);
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = row[j] - lse;
  }
  return out;
}

/// Gamma row-major from the logits, diagonal as one minus the off-diagonal row sum.
template <class S>
std::vector<S> tpm(std::span<const S> w, const EmissionSpec& spec) {
  using std::exp;
  const std::size_t m = check_working(w, spec);
  std::vector<S> out(m * m);
  std::vector<S> row(m);
  std::size_t k = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) row[j] = (i == j) ? S(0.0) : w[k++];
    const S lse = logsumexp(row);
    S off = S(0.0);
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i) continue;
      out[i * m + j] = exp(row[j] - lse);
      off = off + out[i * m + j];
    }
    // 1 - off keeps the row sum exact; when the diagonal is small that
    // subtraction cancels, so fall back to the equivalent exp(-lse)
    out[i * m + i] = value_of(off) < 0.5 ? S(1.0) - off : exp(-lse);
  }
  return out;
}

/// Stationary distribution of a row-major m x m TPM by Gaussian elimination
/// with partial pivoting on (I - Gamma + U)^T.
template <class S>
std::vector<S> stationary(const std::vector<S>& gamma, std::size_t m) {
  std::vector<S> a(m * m);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < m; ++c) {
      // transpose: row r of A^T is column r of (I - Gamma + U)
      a[r * m + c] = S((r == c ? 1.0 : 0.0) + 1.0) - gamma[c * m + r];
    }
  }
  std::vector<S> b(m, S(1.0));
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t piv = col;
    double best = std::abs(value_of(a[col * m + col]));
    for (std::size_t r = col + 1; r < m; ++r) {
      const double cand = std::abs(value_of(a[r * m + col]));
      if (cand > best) {
        best = cand;
        piv = r;
      }
    }
    if (!(best > 1e-13)) {
      throw NumericalError("stationary system is singular (pivot " + std::to_string(best) +
                           " in column " + std::to_string(col) + "); chain may be reducible");
    }
    if (piv != col) {
      for (std::size_t c = 0; c < m; ++c) std::swap(a[col * m + c], a[piv * m + c]);
      std::swap(b[col], b[piv]);
    }
    for (std::size_t r = col + 1; r < m; ++r) {
      const S factor = a[r * m + col] / a[col * m + col];
      for (std::size_t c = col + 1; c < m; ++c) a[r * m + c] = a[r * m + c] - factor * a[col * m + c];
      b[r] = b[r] - factor * b[col];
    }
  }
  std::vector<S> x(m);
  for (std::size_t r = m; r-- > 0;) {
    S acc = b[r];
    for (std::size_t c = r + 1; c < m; ++c) acc = acc - a[r * m + c] * x[c];
    x[r] = acc / a[r * m + r];
  }
  return x;
}

/// Full natural vector (emission, Gamma row-major, delta) as a function of the
/// working vector. This is the map whose Jacobian drives the delta method.
template <class S>
std::vector<S> natural_vector(std::span<const S> w, const EmissionSpec& spec) {
  using std::exp;
  const std::size_t m = check_working(w, spec);
  const std::size_t off = m * (m - 1);
  std::vector<S> out;
  out.reserve(spec.natural_size());
  if (spec.family == Family::Poisson) {
    for (std::size_t i = 0; i < m; ++i) out.push_back(exp(w[off + i]));
  } else {
    for (std::size_t i = 0; i < m; ++i) out.push_back(w[off + i]);
    for (std::size_t i = 0; i < m; ++i) out.push_back(exp(w[off + m + i]));
  }
  const std::vector<S> g = tpm(w, spec);
  out.insert(out.end(), g.begin(), g.end());
  const std::vector<S> d = stationary(g, m);
  out.insert(out.end(), d.begin(), d.end());
  return out;
}

}  // namespace kernels

}  // namespace hmmkit
