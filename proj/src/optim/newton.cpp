#include <cmath>
#include <limits>

#include "evaluator.hpp"
#include "hmmkit/optim.hpp"

namespace hmmkit::optim {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 40;
constexpr double kRidgeStart = 1e-3;
constexpr double kRidgeGrowth = 10.0;
constexpr double kRidgeMax = 1e12;
// Trust-style cap on the step length in working space; doubles after each capped step taken in full.
constexpr double kInitialRadius = 1.0;

/// Solves (H + mu I) d = -g, raising mu from `mu` until the factorization succeeds.
bool ridge_step(const Eigen::MatrixXd& h, const Eigen::VectorXd& g, double& mu, Eigen::VectorXd& d) {
  while (mu <= kRidgeMax) {
    Eigen::MatrixXd a = h;
    if (mu > 0.0) a.diagonal().array() += mu;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
      d = llt.solve(-g);
      if (d.allFinite() && g.dot(d) < 0.0) return true;
    }
    mu = (mu == 0.0) ? kRidgeStart : mu * kRidgeGrowth;
  }
  return false;
}

}  // namespace

OptimOutcome newton_type(const Objective& obj, const Eigen::VectorXd& x0, const OptimizerConfig& config) {
  detail::Evaluator ev(obj, config.use_supplied_gradient, config.use_supplied_hessian);
  OptimOutcome out;
  out.x_final = x0;
  out.status = Status::EvaluationFailure;
  const Eigen::Index n = x0.size();
  Eigen::VectorXd x = x0;
  double f = ev.value(x);
  out.f_final = f;
  Eigen::VectorXd g;
  if (!std::isfinite(f) || !ev.gradient(x, g)) {
    ev.fill_counts(out);
    return out;
  }
  // Without a supplied Hessian, a BFGS secant approximation of H itself.
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
  bool secant_scaled = false;
  if (ev.has_hessian() && !ev.hessian(x, h)) {
    ev.fill_counts(out);
    return out;
  }

  double radius = kInitialRadius;
  out.status = Status::MaxIterations;
  while (true) {
    if (detail::gradient_converged(g, f, config.tol)) {
      out.status = Status::Converged;
      break;
    }
    if (out.iterations >= config.max_iterations) {
      out.status = Status::MaxIterations;
      break;
    }

    double mu = 0.0;
    bool accepted = false;
    Eigen::VectorXd x_new;
    double f_new = 0.0;
    Eigen::VectorXd d_first;
    bool capped = false;
    double alpha = 1.0;
    while (!accepted) {
      Eigen::VectorXd d;
      if (!ridge_step(h, g, mu, d)) break;
      if (d_first.size() == 0) d_first = d;
      capped = d.norm() > radius;
      if (capped) d *= radius / d.norm();
      const double slope = g.dot(d);
      alpha = 1.0;
      for (int k = 0; k <= kMaxHalvings; ++k, alpha *= 0.5) {
        x_new = x + alpha * d;
        f_new = ev.value(x_new);
        if (std::isfinite(f_new) && f_new <= f + kArmijo * alpha * slope && f_new <= f) {
          accepted = true;
          break;
        }
      }
      if (!accepted) mu = (mu == 0.0) ? kRidgeStart : mu * kRidgeGrowth;
    }
    if (!accepted) {
      const bool flat = d_first.size() > 0 && detail::negligible_decrease(g, d_first, f, config.tol);
      out.status = flat ? Status::Converged : Status::LineSearchFailure;
      break;
    }

    Eigen::VectorXd g_new;
    if (!ev.gradient(x_new, g_new)) {
      out.status = Status::EvaluationFailure;
      break;
    }
    if (capped && alpha == 1.0) radius *= 2.0;
    const bool stall = detail::stalled(x, x_new, f, f_new, config.tol);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    x = x_new;
    f = f_new;
    g = g_new;
    ++out.iterations;

    if (ev.has_hessian()) {
      if (!ev.hessian(x, h)) {
        out.status = Status::EvaluationFailure;
        break;
      }
    } else {
      const double sy = s.dot(y);
      if (sy > 1e-12 * s.norm() * y.norm()) {
        if (!secant_scaled) {
          h *= y.squaredNorm() / sy;
          secant_scaled = true;
        }
        const Eigen::VectorXd hs = h * s;
        h += (y * y.transpose()) / sy - (hs * hs.transpose()) / s.dot(hs);
      }
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

}  // namespace hmmkit::optim
