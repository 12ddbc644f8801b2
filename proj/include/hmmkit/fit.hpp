#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>

#include "hmmkit/likelihood.hpp"
#include "hmmkit/optim.hpp"
#include "hmmkit/params.hpp"

namespace hmmkit {

struct FitResult {
  EmissionSpec spec;
  std::size_t T = 0;
  WorkingParams working_hat;
  NaturalParams natural_hat;  ///< states sorted by ascending location
  double nll = 0.0;
  bool converged = false;
  optim::Status status = optim::Status::EvaluationFailure;
  int iterations = 0;
  int function_evals = 0;
  int gradient_evals = 0;
  int hessian_evals = 0;
  std::string optimizer_id;
  Eigen::MatrixXd hessian_working;  ///< empty when it could not be evaluated
  std::optional<Eigen::MatrixXd> cov_natural;
};

/// value, AD gradient and AD Hessian of the nll over working parameters.
optim::Objective make_objective(const ObservationSeries& obs, const EmissionSpec& spec);

/// Maps init to working space, minimizes, sorts states, evaluates the Hessian
/// at the optimum. Non-convergence is reported in the result, never thrown.
FitResult fit(const EmissionSpec& spec, const ObservationSeries& obs, const NaturalParams& init,
              const optim::OptimizerConfig& config);

/// Assembles a FitResult from an optimizer outcome: sorts states and, unless
/// `with_hessian` is false, evaluates the AD Hessian at the estimate.
FitResult finalize_fit(const EmissionSpec& spec, const ObservationSeries& obs, const optim::OptimOutcome& outcome,
                       const std::string& optimizer_id, bool with_hessian = true);

/// Data-driven starting values: emission locations at evenly spaced sample
/// quantiles, a common spread for Gaussian states, and a TPM with 0.8 on the
/// diagonal and the remainder shared equally.
NaturalParams default_init(const ObservationSeries& obs, const EmissionSpec& spec);

}  // namespace hmmkit
