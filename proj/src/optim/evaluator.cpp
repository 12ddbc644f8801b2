#include "evaluator.hpp"

#include <cmath>
#include <limits>

#include "hmmkit/errors.hpp"

namespace hmmkit::optim::detail {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

Evaluator::Evaluator(const Objective& f, bool use_gradient, bool use_hessian)
    : f_(f),
      use_gradient_(use_gradient && static_cast<bool>(f.gradient)),
      use_hessian_(use_hessian && static_cast<bool>(f.hessian)) {}

double Evaluator::value(const Eigen::VectorXd& x) {
  ++function_evals_;
  try {
    const double v = f_.value(x);
    return std::isfinite(v) ? v : kNaN;
  } catch (const EvaluationError&) {
    return kNaN;
  } catch (const DomainError&) {
    return kNaN;
  } catch (const NumericalError&) {
    return kNaN;
  }
}

bool Evaluator::gradient(const Eigen::VectorXd& x, Eigen::VectorXd& g) {
  if (use_gradient_) {
    ++gradient_evals_;
    try {
      g = f_.gradient(x);
    } catch (const Error&) {
      return false;
    }
    return g.allFinite();
  }
  // central differences; cbrt(eps) balances truncation against rounding
  static const double kStep = std::cbrt(std::numeric_limits<double>::epsilon());
  g.resize(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = kStep * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + h;
    const double hi_step = xp[i] - x[i];
    const double fp = value(xp);
    xp[i] = x[i] - h;
    const double lo_step = x[i] - xp[i];
    const double fm = value(xp);
    xp[i] = x[i];
    fd_evals_ += 2;
    if (!std::isfinite(fp) || !std::isfinite(fm)) return false;
    g[i] = (fp - fm) / (hi_step + lo_step);
  }
  return true;
}

bool Evaluator::hessian(const Eigen::VectorXd& x, Eigen::MatrixXd& h) {
  if (!use_hessian_) return false;
  ++hessian_evals_;
  try {
    h = f_.hessian(x);
  } catch (const Error&) {
    return false;
  }
  return h.allFinite();
}

void Evaluator::fill_counts(OptimOutcome& out) const {
  out.function_evals = function_evals_;
  out.fd_function_evals = fd_evals_;
  out.gradient_evals = gradient_evals_;
  out.hessian_evals = hessian_evals_;
}

bool gradient_converged(const Eigen::VectorXd& g, double f, const Tolerances& tol) {
  return g.size() == 0 || g.cwiseAbs().maxCoeff() <= tol.gradient * std::max(1.0, std::abs(f));
}

bool stalled(const Eigen::VectorXd& x_old, const Eigen::VectorXd& x_new, double f_old, double f_new,
             const Tolerances& tol) {
  const double df = std::abs(f_old - f_new);
  const double dx = (x_new - x_old).cwiseAbs().maxCoeff();
  const double scale = 1.0 + x_new.cwiseAbs().maxCoeff();
  return df <= tol.relative_f * std::max(std::abs(f_new), 1e-300) && dx <= tol.step * scale;
}

bool negligible_decrease(const Eigen::VectorXd& g, const Eigen::VectorXd& d, double f, const Tolerances& tol) {
  const double predicted = -g.dot(d);
  return std::isfinite(predicted) && predicted <= tol.relative_f * std::max(std::abs(f), 1e-300);
}

LineSearchResult wolfe_search(Evaluator& ev, const Eigen::VectorXd& x, double f0, const Eigen::VectorXd& g0,
                              const Eigen::VectorXd& d, double alpha0, double c1, double c2, int max_zoom) {
  const double dphi0 = g0.dot(d);
  LineSearchResult res;
  if (!(dphi0 < 0.0)) return res;

  struct Point {
    double a = 0.0;
    double f = 0.0;
    double dphi = 0.0;
    Eigen::VectorXd x;
    Eigen::VectorXd g;
  };
  auto probe_value = [&](double a, Point& p) {
    p.a = a;
    p.x = x + a * d;
    p.f = ev.value(p.x);
    return std::isfinite(p.f);
  };
  auto probe_slope = [&](Point& p) {
    if (!ev.gradient(p.x, p.g)) return false;
    p.dphi = p.g.dot(d);
    return true;
  };
  auto accept = [&](const Point& p) {
    res.ok = true;
    res.alpha = p.a;
    res.f = p.f;
    res.x = p.x;
    res.g = p.g;
  };
  auto armijo = [&](const Point& p) { return p.f <= f0 + c1 * p.a * dphi0; };
  auto curvature = [&](const Point& p) { return std::abs(p.dphi) <= -c2 * dphi0; };

  // one cubic step through (0, f0, dphi0) and the accepted point
  auto polish = [&](const Point& p) {
    if (std::abs(p.dphi) <= 1e-2 * std::abs(dphi0)) return;
    const double d1 = dphi0 + p.dphi - 3.0 * (f0 - p.f) / (0.0 - p.a);
    const double disc = d1 * d1 - dphi0 * p.dphi;
    if (!(disc >= 0.0)) return;
    const double d2 = std::sqrt(disc);
    const double denom = p.dphi - dphi0 + 2.0 * d2;
    if (denom == 0.0) return;
    const double ac = p.a - p.a * (p.dphi + d2 - d1) / denom;
    if (!(ac > 0.0) || ac > 4.0 * p.a || std::abs(ac - p.a) <= 1e-12 * p.a) return;
    Point c;
    if (!probe_value(ac, c) || !(c.f < p.f) || !armijo(c)) return;
    if (!probe_slope(c) || !curvature(c)) return;
    accept(c);
  };

  auto zoom = [&](Point lo, Point hi, int& budget) {
    while (budget-- > 0) {
      const double width = hi.a - lo.a;
      double a = lo.a + 0.5 * width;
      const double curv = hi.f - lo.f - lo.dphi * width;
      if (std::isfinite(hi.f) && curv > 0.0) {
        const double aq = lo.a - lo.dphi * width * width / (2.0 * curv);
        const double lo_b = std::min(lo.a, hi.a) + 0.1 * std::abs(width);
        const double hi_b = std::max(lo.a, hi.a) - 0.1 * std::abs(width);
        if (aq >= lo_b && aq <= hi_b) a = aq;
      }
      Point p;
      if (!probe_value(a, p) || !armijo(p) || p.f >= lo.f) {
        hi = p;
        if (!std::isfinite(hi.f)) hi.f = std::numeric_limits<double>::infinity();
        continue;
      }
      if (!probe_slope(p)) {
        hi = p;
        hi.f = std::numeric_limits<double>::infinity();
        continue;
      }
      if (curvature(p)) {
        accept(p);
        polish(p);
        return;
      }
      if (p.dphi * (hi.a - lo.a) >= 0.0) hi = lo;
      lo = p;
    }
  };

  Point prev;
  prev.a = 0.0;
  prev.f = f0;
  prev.dphi = dphi0;
  prev.x = x;
  prev.g = g0;
  double a = alpha0;
  int budget = max_zoom;
  for (int expand = 0; expand < 60; ++expand) {
    Point p;
    if (!probe_value(a, p)) {
      // infeasible: pull back towards the last feasible point
      if (budget-- <= 0) return res;
      a = prev.a + 0.5 * (a - prev.a);
      --expand;
      continue;
    }
    if (!armijo(p) || (expand > 0 && p.f >= prev.f)) {
      zoom(prev, p, budget);
      return res;
    }
    if (!probe_slope(p)) return res;
    if (curvature(p)) {
      accept(p);
      polish(p);
      return res;
    }
    if (p.dphi >= 0.0) {
      zoom(p, prev, budget);
      return res;
    }
    prev = p;
    a *= 2.0;
  }
  return res;
}

}  // namespace hmmkit::optim::detail
