#include "hmmkit/fit.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

namespace hmmkit {

optim::Objective make_objective(const ObservationSeries& obs, const EmissionSpec& spec) {
  auto fn = std::make_shared<const decltype(make_nll_function(obs, spec))>(make_nll_function(obs, spec));
  optim::Objective obj;
  obj.value = [fn](const Eigen::VectorXd& x) {
    return ad::value(*fn, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
  };
  obj.gradient = [fn](const Eigen::VectorXd& x) {
    return ad::gradient(*fn, std::span<const double>(x.data(), static_cast<std::size_t>(x.size()))).gradient;
  };
  obj.hessian = [fn](const Eigen::VectorXd& x) {
    return ad::hessian(*fn, std::span<const double>(x.data(), static_cast<std::size_t>(x.size()))).hessian;
  };
  return obj;
}

FitResult finalize_fit(const EmissionSpec& spec, const ObservationSeries& obs, const optim::OptimOutcome& outcome,
                       const std::string& optimizer_id, bool with_hessian) {
  FitResult res;
  res.spec = spec;
  res.T = obs.size();
  res.optimizer_id = optimizer_id;
  res.status = outcome.status;
  res.iterations = outcome.iterations;
  res.function_evals = outcome.function_evals;
  res.gradient_evals = outcome.gradient_evals;
  res.hessian_evals = outcome.hessian_evals;
  res.nll = outcome.f_final;

  if (outcome.x_final.size() != static_cast<Eigen::Index>(spec.working_size()) || !outcome.x_final.allFinite()) {
    res.status = optim::Status::EvaluationFailure;
    return res;
  }
  const WorkingParams raw(outcome.x_final);
  try {
    const NaturalParams unsorted = natural_from_working(raw, spec);
    res.working_hat = permute_states(raw, spec, sort_permutation(unsorted));
    res.natural_hat = natural_from_working(res.working_hat, spec);
  } catch (const Error&) {
    // e.g. a numerically reducible chain at the final point
    res.working_hat = raw;
    res.status = optim::Status::EvaluationFailure;
    return res;
  }

  if (with_hessian && outcome.status != optim::Status::EvaluationFailure) {
    const auto fn = make_nll_function(obs, spec);
    try {
      const auto h = ad::hessian(fn, res.working_hat.span());
      res.nll = h.value;
      res.hessian_working = h.hessian;
    } catch (const Error&) {
      res.hessian_working.resize(0, 0);
      res.status = optim::Status::EvaluationFailure;
    }
  }
  res.converged = res.status == optim::Status::Converged && std::isfinite(res.nll);
  return res;
}

FitResult fit(const EmissionSpec& spec, const ObservationSeries& obs, const NaturalParams& init,
              const optim::OptimizerConfig& config) {
  config.validate();
  obs.validate(spec.family);
  const WorkingParams w0 = working_from_natural(init, spec);
  const optim::Objective obj = make_objective(obs, spec);
  const optim::OptimOutcome outcome = optim::minimize(obj, w0.values, config);
  return finalize_fit(spec, obs, outcome, config.id());
}

NaturalParams default_init(const ObservationSeries& obs, const EmissionSpec& spec) {
  const int m = spec.m;
  if (obs.size() == 0) throw DimensionError("default_init: empty series");
  std::vector<double> x = obs.values;
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = x.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  const double spread = sd > 0.0 ? sd : 1.0;

  Eigen::VectorXd loc(m);
  for (int i = 0; i < m; ++i) {
    const double q = (i + 0.5) / m;
    const auto k = std::min(x.size() - 1, static_cast<std::size_t>(q * n));
    loc[i] = x[k];
  }
  // ties between quantiles would make states indistinguishable
  const double gap = 0.1 * spread / m;
  for (int i = 1; i < m; ++i) loc[i] = std::max(loc[i], loc[i - 1] + gap);

  Eigen::MatrixXd gamma = Eigen::MatrixXd::Ones(1, 1);
  if (m > 1) {
    gamma = Eigen::MatrixXd::Constant(m, m, 0.2 / (m - 1));
    gamma.diagonal().setConstant(0.8);
  }
  if (spec.family == Family::Poisson) {
    for (int i = 0; i < m; ++i) loc[i] = std::max(loc[i], 0.1 * (i + 1));
    return NaturalParams::poisson(gamma, loc);
  }
  return NaturalParams::gaussian(gamma, loc, Eigen::VectorXd::Constant(m, spread / m));
}

}  // namespace hmmkit
