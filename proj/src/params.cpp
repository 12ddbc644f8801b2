#include "hmmkit/params.hpp"

#include <algorithm>
#include <numeric>

namespace hmmkit {

std::string to_string(Family family) {
  return family == Family::Poisson ? "poisson" : "gaussian";
}

Family family_from_string(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "poisson") return Family::Poisson;
  if (lower == "gaussian" || lower == "normal") return Family::Gaussian;
  throw ArgumentError("unknown emission family '" + name + "' (expected poisson or gaussian)");
}

EmissionSpec::EmissionSpec(Family f, int states) : family(f), m(states) {
  if (m < 1) throw ArgumentError("state count must be at least 1, got " + std::to_string(m));
}

std::size_t EmissionSpec::working_size() const {
  const auto mm = static_cast<std::size_t>(m);
  return mm * (mm - 1) + emission_size();
}

std::size_t EmissionSpec::natural_size() const {
  const auto mm = static_cast<std::size_t>(m);
  return emission_size() + mm * mm + mm;
}

NaturalParams NaturalParams::poisson(const Eigen::MatrixXd& gamma, const Eigen::VectorXd& lambda) {
  NaturalParams n;
  n.family = Family::Poisson;
  n.gamma = gamma;
  n.lambda = lambda;
  n.delta = stationary_distribution(gamma);
  n.validate();
  return n;
}

NaturalParams NaturalParams::gaussian(const Eigen::MatrixXd& gamma, const Eigen::VectorXd& mu,
                                      const Eigen::VectorXd& sigma) {
  NaturalParams n;
  n.family = Family::Gaussian;
  n.gamma = gamma;
  n.mu = mu;
  n.sigma = sigma;
  n.delta = stationary_distribution(gamma);
  n.validate();
  return n;
}

void NaturalParams::validate() const {
  const Eigen::Index m = gamma.rows();
  if (m < 1 || gamma.cols() != m) throw DimensionError("gamma must be a non-empty square matrix");
  for (Eigen::Index i = 0; i < m; ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double g = gamma(i, j);
      if (!(g >= 0.0 && g <= 1.0)) {
        throw DomainError("gamma(" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                          ") = " + std::to_string(g) + " is not a probability");
      }
      row += g;
    }
    if (std::abs(row - 1.0) > 1e-12) {
      throw DomainError("gamma row " + std::to_string(i + 1) + " sums to " + std::to_string(row));
    }
  }
  if (family == Family::Poisson) {
    if (lambda.size() != m) throw DimensionError("lambda must have one entry per state");
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!(lambda[i] > 0.0) || !std::isfinite(lambda[i])) {
        throw DomainError("lambda" + std::to_string(i + 1) + " must be positive and finite");
      }
    }
  } else {
    if (mu.size() != m || sigma.size() != m) throw DimensionError("mu and sigma must have one entry per state");
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!std::isfinite(mu[i])) throw DomainError("mu" + std::to_string(i + 1) + " must be finite");
      if (!(sigma[i] > 0.0) || !std::isfinite(sigma[i])) {
        throw DomainError("sigma" + std::to_string(i + 1) + " must be positive and finite");
      }
    }
  }
  if (delta.size() != m) throw DimensionError("delta must have one entry per state");
  if (std::abs(delta.sum() - 1.0) > 1e-10) throw DomainError("delta does not sum to one");
  const Eigen::RowVectorXd residual = delta.transpose() * gamma - delta.transpose();
  if (residual.cwiseAbs().maxCoeff() > 1e-10) throw DomainError("delta is not stationary for gamma");
}

Eigen::VectorXd NaturalParams::flatten() const {
  const EmissionSpec s = spec();
  Eigen::VectorXd out(static_cast<Eigen::Index>(s.natural_size()));
  Eigen::Index k = 0;
  const Eigen::Index m = states();
  if (family == Family::Poisson) {
    for (Eigen::Index i = 0; i < m; ++i) out[k++] = lambda[i];
  } else {
    for (Eigen::Index i = 0; i < m; ++i) out[k++] = mu[i];
    for (Eigen::Index i = 0; i < m; ++i) out[k++] = sigma[i];
  }
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) out[k++] = gamma(i, j);
  for (Eigen::Index i = 0; i < m; ++i) out[k++] = delta[i];
  return out;
}

std::vector<std::string> NaturalParams::names() const {
  std::vector<std::string> out;
  const int m = states();
  if (family == Family::Poisson) {
    for (int i = 1; i <= m; ++i) out.push_back("lambda" + std::to_string(i));
  } else {
    for (int i = 1; i <= m; ++i) out.push_back("mu" + std::to_string(i));
    for (int i = 1; i <= m; ++i) out.push_back("sigma" + std::to_string(i));
  }
  for (int i = 1; i <= m; ++i)
    for (int j = 1; j <= m; ++j) out.push_back("gamma" + std::to_string(i) + std::to_string(j));
  for (int i = 1; i <= m; ++i) out.push_back("delta" + std::to_string(i));
  return out;
}

NaturalParams natural_from_working(const WorkingParams& w, const EmissionSpec& spec) {
  const std::span<const double> x = w.span();
  kernels::check_working(x, spec);
  for (double v : x) {
    if (!std::isfinite(v)) throw DomainError("working vector contains a non-finite entry");
  }
  const auto v = kernels::natural_vector(x, spec);
  const Eigen::Index m = spec.m;
  NaturalParams n;
  n.family = spec.family;
  std::size_t k = 0;
  if (spec.family == Family::Poisson) {
    n.lambda.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) n.lambda[i] = v[k++];
  } else {
    n.mu.resize(m);
    n.sigma.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) n.mu[i] = v[k++];
    for (Eigen::Index i = 0; i < m; ++i) n.sigma[i] = v[k++];
  }
  n.gamma.resize(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) n.gamma(i, j) = v[k++];
  n.delta.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) n.delta[i] = v[k++];
  return n;
}

WorkingParams working_from_natural(const NaturalParams& n, const EmissionSpec& spec) {
  if (n.family != spec.family || n.states() != spec.m) {
    throw DimensionError("natural parameters do not match the emission spec");
  }
  const Eigen::Index m = spec.m;
  Eigen::VectorXd w(static_cast<Eigen::Index>(spec.working_size()));
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double diag = n.gamma(i, i);
    if (!(diag > 0.0)) {
      throw DomainError("gamma(" + std::to_string(i + 1) + "," + std::to_string(i + 1) +
                        ") must be strictly positive for the logit map");
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j == i) continue;
      const double g = n.gamma(i, j);
      if (!(g > 0.0)) {
        throw DomainError("gamma(" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                          ") must be strictly positive for the logit map");
      }
      w[k++] = std::log(g / diag);
    }
  }
  if (spec.family == Family::Poisson) {
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!(n.lambda[i] > 0.0)) throw DomainError("lambda must be positive");
      w[k++] = std::log(n.lambda[i]);
    }
  } else {
    for (Eigen::Index i = 0; i < m; ++i) w[k++] = n.mu[i];
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!(n.sigma[i] > 0.0)) throw DomainError("sigma must be positive");
      w[k++] = std::log(n.sigma[i]);
    }
  }
  return WorkingParams(std::move(w));
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& gamma) {
  const auto m = static_cast<std::size_t>(gamma.rows());
  if (m == 0 || gamma.cols() != gamma.rows()) throw DimensionError("gamma must be a non-empty square matrix");
  std::vector<double> g(m * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) g[i * m + j] = gamma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  const std::vector<double> d = kernels::stationary(g, m);
  Eigen::VectorXd out(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) out[static_cast<Eigen::Index>(i)] = d[i];
  return out;
}

std::vector<int> sort_permutation(const NaturalParams& n) {
  std::vector<int> perm(static_cast<std::size_t>(n.states()));
  std::iota(perm.begin(), perm.end(), 0);
  const Eigen::VectorXd& loc = n.location();
  std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) { return loc[a] < loc[b]; });
  return perm;
}

NaturalParams permute_states(const NaturalParams& n, const std::vector<int>& perm) {
  const Eigen::Index m = n.states();
  if (static_cast<Eigen::Index>(perm.size()) != m) throw DimensionError("permutation size mismatch");
  NaturalParams out = n;
  for (Eigen::Index a = 0; a < m; ++a) {
    const int pa = perm[static_cast<std::size_t>(a)];
    for (Eigen::Index b = 0; b < m; ++b) out.gamma(a, b) = n.gamma(pa, perm[static_cast<std::size_t>(b)]);
    out.delta[a] = n.delta[pa];
    if (n.family == Family::Poisson) {
      out.lambda[a] = n.lambda[pa];
    } else {
      out.mu[a] = n.mu[pa];
      out.sigma[a] = n.sigma[pa];
    }
  }
  return out;
}

WorkingParams permute_states(const WorkingParams& w, const EmissionSpec& spec, const std::vector<int>& perm) {
  kernels::check_working(w.span(), spec);
  const int m = spec.m;
  // logits indexed (i, j), j != i, row-major with the diagonal skipped
  auto logit_index = [m](int i, int j) { return i * (m - 1) + (j < i ? j : j - 1); };
  Eigen::VectorXd out = w.values;
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) {
      if (a == b) continue;
      out[logit_index(a, b)] = w.values[logit_index(perm[static_cast<std::size_t>(a)], perm[static_cast<std::size_t>(b)])];
    }
  }
  const int off = m * (m - 1);
  const int blocks = spec.family == Family::Poisson ? 1 : 2;
  for (int blk = 0; blk < blocks; ++blk) {
    for (int a = 0; a < m; ++a) {
      out[off + blk * m + a] = w.values[off + blk * m + perm[static_cast<std::size_t>(a)]];
    }
  }
  return WorkingParams(std::move(out));
}

NaturalParams sort_states(const NaturalParams& n) { return permute_states(n, sort_permutation(n)); }

}  // namespace hmmkit
