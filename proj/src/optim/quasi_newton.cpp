#include <algorithm>
#include <cmath>
#include <limits>

#include "evaluator.hpp"
#include "hmmkit/optim.hpp"

namespace hmmkit::optim {

namespace {

constexpr double kWolfeC1 = 1e-4;
constexpr double kBfgsC2 = 0.9;
// Fletcher-Reeves needs c2 < 1/2 for every direction to be a descent direction.
constexpr double kCgC2 = 0.1;

OptimOutcome start(detail::Evaluator& ev, const Eigen::VectorXd& x0, double& f, Eigen::VectorXd& g) {
  OptimOutcome out;
  out.x_final = x0;
  out.status = Status::EvaluationFailure;
  f = ev.value(x0);
  out.f_final = f;
  if (std::isfinite(f) && ev.gradient(x0, g)) out.status = Status::MaxIterations;
  return out;
}

}  // namespace

OptimOutcome bfgs(const Objective& obj, const Eigen::VectorXd& x0, const OptimizerConfig& config) {
  detail::Evaluator ev(obj, config.use_supplied_gradient, false);
  double f = 0.0;
  Eigen::VectorXd g;
  OptimOutcome out = start(ev, x0, f, g);
  if (out.status == Status::EvaluationFailure) {
    ev.fill_counts(out);
    return out;
  }
  const Eigen::Index n = x0.size();
  Eigen::VectorXd x = x0;
  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;

  while (true) {
    if (detail::gradient_converged(g, f, config.tol)) {
      out.status = Status::Converged;
      break;
    }
    if (out.iterations >= config.max_iterations) {
      out.status = Status::MaxIterations;
      break;
    }
    Eigen::VectorXd d = -h_inv * g;
    if (!(g.dot(d) < 0.0)) {
      h_inv.setIdentity();
      scaled = false;
      d = -g;
    }
    // until the first curvature pair rescales h_inv, keep the trial step near unit length
    const double alpha0 = scaled ? 1.0 : 1.0 / std::max(1.0, g.cwiseAbs().maxCoeff());
    const auto ls = detail::wolfe_search(ev, x, f, g, d, alpha0, kWolfeC1, kBfgsC2);
    if (!ls.ok) {
      out.status = detail::negligible_decrease(g, d, f, config.tol) ? Status::Converged : Status::LineSearchFailure;
      break;
    }
    const Eigen::VectorXd s = ls.x - x;
    const Eigen::VectorXd y = ls.g - g;
    const bool stall = detail::stalled(x, ls.x, f, ls.f, config.tol);
    x = ls.x;
    f = ls.f;
    g = ls.g;
    ++out.iterations;

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        h_inv *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = h_inv * y;
      h_inv += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
    }
    if (stall) {
      out.status = detail::gradient_converged(g, f, config.tol) ? Status::Converged : Status::LineSearchFailure;
      break;
    }
  }
  out.x_final = x;
  out.f_final = f;
  ev.fill_counts(out);
  return out;
}

OptimOutcome conjugate_gradient(const Objective& obj, const Eigen::VectorXd& x0, const OptimizerConfig& config) {
  detail::Evaluator ev(obj, config.use_supplied_gradient, false);
  double f = 0.0;
  Eigen::VectorXd g;
  OptimOutcome out = start(ev, x0, f, g);
  if (out.status == Status::EvaluationFailure) {
    ev.fill_counts(out);
    return out;
  }
  const Eigen::Index n = x0.size();
  Eigen::VectorXd x = x0;
  Eigen::VectorXd d = -g;
  out.restart_gradient_norms.push_back(g.norm());
  double alpha = 1.0 / std::max(1.0, g.cwiseAbs().maxCoeff());
  double prev_slope = 0.0;
  int since_restart = 0;

  while (true) {
    if (detail::gradient_converged(g, f, config.tol)) {
      out.status = Status::Converged;
      break;
    }
    if (out.iterations >= config.max_iterations) {
      out.status = Status::MaxIterations;
      break;
    }
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      d = -g;
      slope = g.dot(d);
      since_restart = 0;
      out.restart_gradient_norms.push_back(g.norm());
    }
    if (out.iterations > 0 && prev_slope < 0.0) alpha = std::min(1e3, alpha * prev_slope / slope);
    const auto ls = detail::wolfe_search(ev, x, f, g, d, alpha, kWolfeC1, kCgC2);
    if (!ls.ok) {
      out.status = detail::negligible_decrease(g, d, f, config.tol) ? Status::Converged : Status::LineSearchFailure;
      break;
    }
    const bool stall = detail::stalled(x, ls.x, f, ls.f, config.tol);
    const double gg_old = g.squaredNorm();
    alpha = ls.alpha;
    prev_slope = slope;
    x = ls.x;
    f = ls.f;
    g = ls.g;
    ++out.iterations;
    ++since_restart;
    if (stall) {
      out.status = detail::gradient_converged(g, f, config.tol) ? Status::Converged : Status::LineSearchFailure;
      break;
    }
    if (since_restart >= n) {
      d = -g;
      since_restart = 0;
      out.restart_gradient_norms.push_back(g.norm());
    } else {
      const double beta = g.squaredNorm() / gg_old;
      d = -g + beta * d;
    }
  }
  out.x_final = x;
  out.f_final = f;
  ev.fill_counts(out);
  return out;
}

}  // namespace hmmkit::optim
