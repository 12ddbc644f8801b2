#pragma once

// Test-only oracles and generators. Nothing here calls into the recursions it
// is used to check: simulation, enumeration and finite differences are all
// written out directly.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "hmmkit/likelihood.hpp"
#include "hmmkit/params.hpp"

namespace hmmkit::testing {

inline Eigen::MatrixXd tpm2(double g12, double g21) {
  Eigen::MatrixXd g(2, 2);
  g << 1.0 - g12, g12, g21, 1.0 - g21;
  return g;
}

/// Rows drawn uniformly and shifted away from zero so every entry is positive.
inline Eigen::MatrixXd random_tpm(std::mt19937_64& rng, int m) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Eigen::MatrixXd g(m, m);
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int j = 0; j < m; ++j) {
      g(i, j) = u(rng) + (i == j ? 1.0 : 0.0);
      s += g(i, j);
    }
    g.row(i) /= s;
    // force exact row sums by assigning the diagonal last
    double off = 0.0;
    for (int j = 0; j < m; ++j) off += (j == i) ? 0.0 : g(i, j);
    g(i, i) = 1.0 - off;
  }
  return g;
}

inline NaturalParams random_natural(std::mt19937_64& rng, Family family, int m) {
  const Eigen::MatrixXd g = random_tpm(rng, m);
  if (family == Family::Poisson) {
    std::uniform_real_distribution<double> u(0.5, 9.0);
    Eigen::VectorXd lambda(m);
    for (int i = 0; i < m; ++i) lambda[i] = u(rng);
    return NaturalParams::poisson(g, lambda);
  }
  std::uniform_real_distribution<double> um(-4.0, 4.0);
  std::uniform_real_distribution<double> us(0.5, 2.5);
  Eigen::VectorXd mu(m);
  Eigen::VectorXd sigma(m);
  for (int i = 0; i < m; ++i) {
    mu[i] = um(rng);
    sigma[i] = us(rng);
  }
  return NaturalParams::gaussian(g, mu, sigma);
}

/// Straightforward Markov chain simulation; independent of the library's simulator.
inline ObservationSeries draw_series(std::mt19937_64& rng, const NaturalParams& n, std::size_t T,
                                     std::vector<int>* states = nullptr) {
  const int m = n.states();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto draw_index = [&](const Eigen::RowVectorXd& p) {
    double r = u(rng);
    for (int i = 0; i < m - 1; ++i) {
      if (r < p[i]) return i;
      r -= p[i];
    }
    return m - 1;
  };
  std::vector<double> x(T);
  int c = draw_index(n.delta.transpose());
  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0) c = draw_index(n.gamma.row(c));
    if (states) states->push_back(c);
    if (n.family == Family::Poisson) {
      std::poisson_distribution<int> pd(n.lambda[c]);
      x[t] = pd(rng);
    } else {
      std::normal_distribution<double> nd(n.mu[c], n.sigma[c]);
      x[t] = nd(rng);
    }
  }
  return ObservationSeries(std::move(x));
}

inline double density(const NaturalParams& n, int i, double x) {
  if (n.family == Family::Poisson) {
    return std::exp(x * std::log(n.lambda[i]) - n.lambda[i] - std::lgamma(x + 1.0));
  }
  const double z = (x - n.mu[i]) / n.sigma[i];
  return std::exp(-0.5 * z * z) / (n.sigma[i] * std::sqrt(2.0 * M_PI));
}

/// delta P(x1) Gamma P(x2) ... Gamma P(xT) 1' evaluated as dense products.
inline double matrix_product_likelihood(const NaturalParams& n, const ObservationSeries& obs) {
  const int m = n.states();
  auto P = [&](double x) {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) p(i, i) = density(n, i, x);
    return p;
  };
  Eigen::RowVectorXd row = n.delta.transpose() * P(obs[0]);
  for (std::size_t t = 1; t < obs.size(); ++t) row = row * n.gamma * P(obs[t]);
  return row.sum();
}

/// P(C_t = i | x) by enumerating every state path; T x m.
inline Eigen::MatrixXd enumerated_posterior(const NaturalParams& n, const ObservationSeries& obs) {
  const int m = n.states();
  const std::size_t T = obs.size();
  Eigen::MatrixXd post = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(T), m);
  std::vector<int> path(T, 0);
  double total = 0.0;
  for (;;) {
    double p = n.delta[path[0]] * density(n, path[0], obs[0]);
    for (std::size_t t = 1; t < T; ++t) p *= n.gamma(path[t - 1], path[t]) * density(n, path[t], obs[t]);
    total += p;
    for (std::size_t t = 0; t < T; ++t) post(static_cast<Eigen::Index>(t), path[t]) += p;
    std::size_t pos = 0;
    while (pos < T && ++path[pos] == m) path[pos++] = 0;
    if (pos == T) break;
  }
  return post / total;
}

inline double fd_step(double x) { return std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, std::abs(x)); }

inline Eigen::VectorXd central_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    const double h = fd_step(x[i]);
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (xp[i] - xm[i]);
  }
  return g;
}

/// Central differences of a vector-valued map; columns are input directions.
inline Eigen::MatrixXd central_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g,
                                        const Eigen::VectorXd& x, double step = -1.0) {
  const Eigen::VectorXd g0 = g(x);
  Eigen::MatrixXd jac(g0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    const double h = step > 0.0 ? step : fd_step(x[i]);
    xp[i] += h;
    xm[i] -= h;
    jac.col(i) = (g(xp) - g(xm)) / (xp[i] - xm[i]);
  }
  return jac;
}

inline bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(1.0, std::abs(b));
}

}  // namespace hmmkit::testing
