#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hmmkit/fit.hpp"
#include "hmmkit/likelihood.hpp"
#include "hmmkit/params.hpp"

namespace hmmkit {

/// P(C_t = i | x) from the log-space forward/backward variables; m x T.
Eigen::MatrixXd smoothing_probabilities(const NaturalParams& n, const ObservationSeries& obs);

struct SmoothingReport {
  Eigen::MatrixXd probs;     ///< m x T
  Eigen::MatrixXd se;        ///< m x T, delta method
  Eigen::MatrixXd ci_lower;  ///< clipped to [0, 1]
  Eigen::MatrixXd ci_upper;
  std::vector<int> most_likely_state;  ///< one-based, argmax over each column
  double level = 0.95;
};

/// Standard errors of every p_it from the gradient of p_it with respect to the
/// working parameters and the inverse nll Hessian. Requires a converged fit.
SmoothingReport smoothing_with_uncertainty(const FitResult& fit, const ObservationSeries& obs, double level = 0.95,
                                           bool parallel = true);

/// Inverse of the working-parameter Hessian by Cholesky, retried once with a
/// small diagonal jitter. Throws CovarianceUnavailable otherwise.
Eigen::MatrixXd working_covariance(const FitResult& fit);

/// J H^-1 J' with J the Jacobian of the natural vector (NaturalParams::flatten
/// order) with respect to the working parameters.
Eigen::MatrixXd covariance_natural(const FitResult& fit);

struct Bounds {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

struct ConfidenceInterval {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
};

/// Inverse standard normal CDF (Acklam's rational approximation with one
/// Halley refinement step).
double normal_quantile(double p);

/// estimate +- z * se intersected with `bounds`.
ConfidenceInterval wald_ci(double estimate, double se, double level, std::optional<Bounds> bounds = std::nullopt);

/// Natural range of each entry of the flattened natural vector.
std::vector<Bounds> natural_bounds(const EmissionSpec& spec);

struct ParameterEstimate {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// One row per natural parameter; fills fit.cov_natural if it is empty.
std::vector<ParameterEstimate> wald_table(FitResult& fit, double level = 0.95);

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). `sorted` must be ascending and non-empty.
double percentile(const std::vector<double>& sorted, double p);

struct BootstrapOptions {
  int B = 200;
  std::uint64_t seed = 1;
  double level = 0.95;
  bool parallel = true;
};

struct BootstrapResult {
  std::vector<std::string> names;
  Eigen::VectorXd median;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::MatrixXd estimates;  ///< successful refits x natural parameters
  int requested = 0;
  int failures = 0;
};

/// Simulates B series of length fit.T from natural_hat, refits each with the
/// fit's optimizer starting from natural_hat, and reports percentile intervals.
/// Failed refits are dropped; more than half failing throws BootstrapUnreliable.
BootstrapResult parametric_bootstrap(const FitResult& fit, const BootstrapOptions& options);

struct InformationCriteria {
  double aic = 0.0;
  double bic = 0.0;
};

InformationCriteria aic_bic(double nll, std::size_t k, std::size_t T);

struct SelectionRow {
  int m = 0;
  std::size_t k = 0;
  bool converged = false;
  double nll = 0.0;  ///< NaN unless converged
  InformationCriteria ic;
};

struct Selection {
  std::vector<SelectionRow> rows;
  int best_aic = -1;  ///< index into rows, -1 when nothing converged
  int best_bic = -1;
};

/// Fits m = m_min..m_max from default_init and ranks converged fits by AIC and BIC.
Selection select_states(const ObservationSeries& obs, Family family, int m_min, int m_max,
                        const optim::OptimizerConfig& config);

}  // namespace hmmkit
