#pragma once

#include <Eigen/Dense>

#include "hmmkit/optim.hpp"

namespace hmmkit::optim::detail {

/// Wraps an Objective with evaluation accounting, failure capture and a
/// central-difference gradient when none is supplied.
class Evaluator {
 public:
  Evaluator(const Objective& f, bool use_gradient, bool use_hessian);

  /// NaN when the point is infeasible.
  double value(const Eigen::VectorXd& x);
  bool gradient(const Eigen::VectorXd& x, Eigen::VectorXd& g);
  bool hessian(const Eigen::VectorXd& x, Eigen::MatrixXd& h);

  bool has_hessian() const { return use_hessian_; }
  bool supplied_gradient() const { return use_gradient_; }

  void fill_counts(OptimOutcome& out) const;

 private:
  const Objective& f_;
  bool use_gradient_;
  bool use_hessian_;
  int function_evals_ = 0;
  int fd_evals_ = 0;
  int gradient_evals_ = 0;
  int hessian_evals_ = 0;
};

bool gradient_converged(const Eigen::VectorXd& g, double f, const Tolerances& tol);
bool stalled(const Eigen::VectorXd& x_old, const Eigen::VectorXd& x_new, double f_old, double f_new,
             const Tolerances& tol);

/// True when the decrease predicted along d, -g'd, is below the relative-f
/// tolerance: no line search can resolve further progress in floating point.
bool negligible_decrease(const Eigen::VectorXd& g, const Eigen::VectorXd& d, double f, const Tolerances& tol);

struct LineSearchResult {
  bool ok = false;
  double alpha = 0.0;
  double f = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd g;
};

/// Strong-Wolfe line search (bracketing then zoom by safeguarded quadratic
/// interpolation, at most `max_zoom` zoom steps). When the accepted point is
/// not close to a one-dimensional minimizer, one cubic-interpolation step
/// through (0, alpha) is tried and kept if it improves f and still satisfies
/// both Wolfe conditions; on a quadratic this step is exact.
LineSearchResult wolfe_search(Evaluator& ev, const Eigen::VectorXd& x, double f0, const Eigen::VectorXd& g0,
                              const Eigen::VectorXd& d, double alpha0, double c1, double c2, int max_zoom = 50);

}  // namespace hmmkit::optim::detail
