#include "hmmkit/inference.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "hmmkit/parallel.hpp"
#include "hmmkit/simulate.hpp"

namespace hmmkit {

Eigen::MatrixXd smoothing_probabilities(const NaturalParams& n, const ObservationSeries& obs) {
  const ForwardBackwardCache cache = forward_backward(n, obs);
  const Eigen::Index m = cache.log_alpha.rows();
  const Eigen::Index T = cache.log_alpha.cols();
  Eigen::MatrixXd p(m, T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const Eigen::VectorXd joint = cache.log_alpha.col(t) + cache.log_beta.col(t);
    const double mx = joint.maxCoeff();
    const Eigen::VectorXd e = (joint.array() - mx).exp();
    p.col(t) = e / e.sum();
  }
  return p;
}

namespace {

void require_converged(const FitResult& fit) {
  if (!fit.converged) {
    throw ArgumentError("fit did not converge (status " + optim::to_string(fit.status) + ")");
  }
}

double condition_number(const Eigen::MatrixXd& h) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd ev = es.eigenvalues().cwiseAbs();
  const double lo = ev.minCoeff();
  return lo > 0.0 ? ev.maxCoeff() / lo : std::numeric_limits<double>::infinity();
}

}  // namespace

Eigen::MatrixXd working_covariance(const FitResult& fit) {
  const Eigen::MatrixXd& h = fit.hessian_working;
  if (h.size() == 0 || !h.allFinite()) {
    throw CovarianceUnavailable("Hessian at the estimate is unavailable", std::numeric_limits<double>::infinity());
  }
  const Eigen::Index k = h.rows();
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() != Eigen::Success) {
    const double jitter = 1e-8 * std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
    llt.compute(h + jitter * Eigen::MatrixXd::Identity(k, k));
    if (llt.info() != Eigen::Success) {
      const double cond = condition_number(h);
      throw CovarianceUnavailable("Hessian is not positive definite (condition number " + std::to_string(cond) + ")",
                                  cond);
    }
  }
  Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(k, k));
  if (!cov.allFinite()) {
    const double cond = condition_number(h);
    throw CovarianceUnavailable("Hessian inverse is not finite (condition number " + std::to_string(cond) + ")", cond);
  }
  return 0.5 * (cov + cov.transpose());
}

Eigen::MatrixXd covariance_natural(const FitResult& fit) {
  const Eigen::MatrixXd cov_w = working_covariance(fit);
  const EmissionSpec spec = fit.spec;
  const Eigen::MatrixXd J = ad::jacobian([&spec](auto w) { return kernels::natural_vector(w, spec); },
                                         fit.working_hat.span());
  const Eigen::MatrixXd cov = J * cov_w * J.transpose();
  return 0.5 * (cov + cov.transpose());
}

SmoothingReport smoothing_with_uncertainty(const FitResult& fit, const ObservationSeries& obs, double level,
                                           bool parallel) {
  require_converged(fit);
  if (!(level > 0.0 && level < 1.0)) throw ArgumentError("level must lie in (0, 1)");
  obs.validate(fit.spec.family);
  const Eigen::MatrixXd cov_w = working_covariance(fit);
  const EmissionSpec spec = fit.spec;
  const auto m = static_cast<Eigen::Index>(spec.m);
  const auto T = static_cast<Eigen::Index>(obs.size());

  // rows of J are the cells (t, i) in the kernel's T x m row-major order
  const Eigen::MatrixXd J = ad::jacobian([&](auto w) { return kernels::smoothing(w, obs, spec); },
                                         fit.working_hat.span(), parallel, worker_count());
  const auto probs_flat = kernels::smoothing<double>(fit.working_hat.span(), obs, spec);
  const Eigen::MatrixXd JS = J * cov_w;
  const double z = normal_quantile(0.5 + 0.5 * level);

  SmoothingReport r;
  r.level = level;
  r.probs.resize(m, T);
  r.se.resize(m, T);
  r.ci_lower.resize(m, T);
  r.ci_upper.resize(m, T);
  r.most_likely_state.resize(static_cast<std::size_t>(T));
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const Eigen::Index row = t * m + i;
      const double p = probs_flat[static_cast<std::size_t>(row)];
      const double var = JS.row(row).dot(J.row(row));
      const double se = std::sqrt(std::max(var, 0.0));
      r.probs(i, t) = p;
      r.se(i, t) = se;
      r.ci_lower(i, t) = std::clamp(p - z * se, 0.0, p);
      r.ci_upper(i, t) = std::clamp(p + z * se, p, 1.0);
    }
    Eigen::Index best = 0;
    r.probs.col(t).maxCoeff(&best);
    r.most_likely_state[static_cast<std::size_t>(t)] = static_cast<int>(best) + 1;
  }
  return r;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError("normal quantile needs p in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley step against the exact CDF
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

ConfidenceInterval wald_ci(double estimate, double se, double level, std::optional<Bounds> bounds) {
  if (!(level > 0.0 && level < 1.0)) throw ArgumentError("confidence level must lie in (0, 1)");
  if (!(se >= 0.0)) throw ArgumentError("standard error must be nonnegative");
  const double z = normal_quantile(0.5 + 0.5 * level);
  ConfidenceInterval ci{estimate, estimate - z * se, estimate + z * se, level};
  if (bounds) {
    ci.lower = std::max(ci.lower, bounds->lower);
    ci.upper = std::min(ci.upper, bounds->upper);
  }
  ci.lower = std::min(ci.lower, estimate);
  ci.upper = std::max(ci.upper, estimate);
  return ci;
}

std::vector<Bounds> natural_bounds(const EmissionSpec& spec) {
  std::vector<Bounds> out;
  const auto m = static_cast<std::size_t>(spec.m);
  const Bounds positive{0.0, std::numeric_limits<double>::infinity()};
  const Bounds probability{0.0, 1.0};
  if (spec.family == Family::Poisson) {
    out.insert(out.end(), m, positive);
  } else {
    out.insert(out.end(), m, Bounds{});
    out.insert(out.end(), m, positive);
  }
  out.insert(out.end(), m * m + m, probability);
  return out;
}

std::vector<ParameterEstimate> wald_table(FitResult& fit, double level) {
  require_converged(fit);
  if (!fit.cov_natural) fit.cov_natural = covariance_natural(fit);
  const Eigen::VectorXd est = fit.natural_hat.flatten();
  const auto names = fit.natural_hat.names();
  const auto bounds = natural_bounds(fit.spec);
  std::vector<ParameterEstimate> rows;
  for (Eigen::Index k = 0; k < est.size(); ++k) {
    const double se = std::sqrt(std::max((*fit.cov_natural)(k, k), 0.0));
    const auto ci = wald_ci(est[k], se, level, bounds[static_cast<std::size_t>(k)]);
    rows.push_back({names[static_cast<std::size_t>(k)], est[k], se, ci.lower, ci.upper});
  }
  return rows;
}

double percentile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw ArgumentError("percentile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BootstrapResult parametric_bootstrap(const FitResult& fit, const BootstrapOptions& options) {
  require_converged(fit);
  if (options.B < 2) throw ArgumentError("bootstrap needs B >= 2");
  if (!(options.level > 0.0 && options.level < 1.0)) throw ArgumentError("level must lie in (0, 1)");
  const optim::OptimizerConfig config = optim::OptimizerConfig::from_id(fit.optimizer_id);
  const NaturalParams& truth = fit.natural_hat;
  const auto k = static_cast<Eigen::Index>(fit.spec.natural_size());
  const int B = options.B;

  Eigen::MatrixXd all(B, k);
  std::vector<char> ok(static_cast<std::size_t>(B), 0);
  auto one = [&](int b) {
    std::mt19937_64 rng = replication_rng(options.seed, static_cast<std::uint64_t>(b));
    const SimulatedSeries sim = simulate(truth, fit.T, rng);
    try {
      const FitResult r = hmmkit::fit(fit.spec, sim.obs, truth, config);
      if (r.converged) {
        all.row(b) = r.natural_hat.flatten().transpose();
        ok[static_cast<std::size_t>(b)] = 1;
      }
    } catch (const Error&) {
    }
  };
  if (options.parallel) {
#pragma omp parallel for schedule(dynamic) num_threads(worker_count())
    for (int b = 0; b < B; ++b) one(b);
  } else {
    for (int b = 0; b < B; ++b) one(b);
  }

  BootstrapResult res;
  res.requested = B;
  res.names = truth.names();
  const int good = static_cast<int>(std::count(ok.begin(), ok.end(), 1));
  res.failures = B - good;
  if (2 * res.failures > B) {
    throw BootstrapUnreliable(std::to_string(res.failures) + " of " + std::to_string(B) + " bootstrap refits failed");
  }
  res.estimates.resize(good, k);
  for (int b = 0, r = 0; b < B; ++b) {
    if (ok[static_cast<std::size_t>(b)]) res.estimates.row(r++) = all.row(b);
  }
  const double tail = 0.5 * (1.0 - options.level);
  res.median.resize(k);
  res.lower.resize(k);
  res.upper.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    std::vector<double> col(res.estimates.col(j).data(), res.estimates.col(j).data() + good);
    std::sort(col.begin(), col.end());
    res.median[j] = percentile(col, 0.5);
    res.lower[j] = percentile(col, tail);
    res.upper[j] = percentile(col, 1.0 - tail);
  }
  return res;
}

InformationCriteria aic_bic(double nll, std::size_t k, std::size_t T) {
  if (k < 1 || T < 1) throw ArgumentError("aic_bic needs k >= 1 and T >= 1");
  const auto kk = static_cast<double>(k);
  return {2.0 * nll + 2.0 * kk, 2.0 * nll + kk * std::log(static_cast<double>(T))};
}

Selection select_states(const ObservationSeries& obs, Family family, int m_min, int m_max,
                        const optim::OptimizerConfig& config) {
  if (m_min < 1 || m_min > m_max) throw ArgumentError("state range needs 1 <= m_min <= m_max");
  obs.validate(family);
  Selection sel;
  for (int m = m_min; m <= m_max; ++m) {
    const EmissionSpec spec(family, m);
    SelectionRow row;
    row.m = m;
    row.k = spec.free_parameters();
    row.nll = row.ic.aic = row.ic.bic = std::numeric_limits<double>::quiet_NaN();
    try {
      const FitResult r = fit(spec, obs, default_init(obs, spec), config);
      row.converged = r.converged;
      if (r.converged) {
        row.nll = r.nll;
        row.ic = aic_bic(r.nll, row.k, obs.size());
      }
    } catch (const NumericalError&) {
    } catch (const DomainError&) {
    }
    sel.rows.push_back(row);
  }
  for (std::size_t i = 0; i < sel.rows.size(); ++i) {
    if (!sel.rows[i].converged) continue;
    const auto idx = static_cast<int>(i);
    if (sel.best_aic < 0 || sel.rows[i].ic.aic < sel.rows[static_cast<std::size_t>(sel.best_aic)].ic.aic) sel.best_aic = idx;
    if (sel.best_bic < 0 || sel.rows[i].ic.bic < sel.rows[static_cast<std::size_t>(sel.best_bic)].ic.bic) sel.best_bic = idx;
  }
  return sel;
}

}  // namespace hmmkit
