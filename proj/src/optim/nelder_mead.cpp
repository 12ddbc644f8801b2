#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hmmkit/errors.hpp"
#include "hmmkit/optim.hpp"

namespace hmmkit::optim {

namespace {
constexpr double kReflect = 1.0;
constexpr double kExpand = 2.0;
constexpr double kContract = 0.5;
constexpr double kShrink = 0.5;
constexpr double kInitialStep = 0.05;
}  // namespace

NelderMead::NelderMead(const Objective& f, const Eigen::VectorXd& x0, const OptimizerConfig& config)
    : f_(f), config_(config) {
  const Eigen::Index n = x0.size();
  vertices_.reserve(static_cast<std::size_t>(n) + 1);
  values_.reserve(static_cast<std::size_t>(n) + 1);
  vertices_.push_back(x0);
  values_.push_back(eval(x0));
  if (!std::isfinite(values_.front())) {
    ok_ = false;
    return;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd v = x0;
    v[i] += kInitialStep * std::max(1.0, std::abs(x0[i]));
    values_.push_back(eval(v));
    vertices_.push_back(std::move(v));
  }
  order_.resize(vertices_.size());
  sort();
}

double NelderMead::eval(const Eigen::VectorXd& x) {
  ++evals_;
  double v = std::numeric_limits<double>::infinity();
  try {
    v = f_.value(x);
  } catch (const Error&) {
    v = std::numeric_limits<double>::infinity();
  }
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

void NelderMead::sort() {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) { return values_[a] < values_[b]; });
}

double NelderMead::diameter() const {
  const Eigen::VectorXd& b = best();
  double d = 0.0;
  for (const auto& v : vertices_) d = std::max(d, (v - b).cwiseAbs().maxCoeff());
  return d;
}

bool NelderMead::converged() const {
  const double fb = values_[order_.front()];
  const double fw = values_[order_.back()];
  if (!std::isfinite(fw)) return false;
  const bool spread_ok = (fw - fb) <= config_.tol.relative_f * (std::abs(fb) + config_.tol.relative_f);
  const double scale = 1.0 + best().cwiseAbs().maxCoeff();
  return spread_ok && diameter() <= config_.tol.step * scale;
}

void NelderMead::step() {
  const std::size_t n = vertices_.size() - 1;
  const std::size_t ib = order_.front();
  const std::size_t iw = order_.back();
  const std::size_t isw = order_[n - 1];
  const double fb = values_[ib];
  const double fw = values_[iw];
  const double fsw = values_[isw];

  Eigen::VectorXd centroid = Eigen::VectorXd::Zero(vertices_.front().size());
  for (std::size_t k = 0; k < n; ++k) centroid += vertices_[order_[k]];
  centroid /= static_cast<double>(n);

  const Eigen::VectorXd xr = centroid + kReflect * (centroid - vertices_[iw]);
  const double fr = eval(xr);
  auto replace_worst = [&](const Eigen::VectorXd& x, double fx) {
    vertices_[iw] = x;
    values_[iw] = fx;
  };

  if (fr < fb) {
    const Eigen::VectorXd xe = centroid + kExpand * (xr - centroid);
    const double fe = eval(xe);
    if (fe < fr) {
      replace_worst(xe, fe);
    } else {
      replace_worst(xr, fr);
    }
  } else if (fr < fsw) {
    replace_worst(xr, fr);
  } else {
    bool shrink = false;
    if (fr < fw) {
      const Eigen::VectorXd xc = centroid + kContract * (xr - centroid);
      const double fc = eval(xc);
      if (fc <= fr) {
        replace_worst(xc, fc);
      } else {
        shrink = true;
      }
    } else {
      const Eigen::VectorXd xcc = centroid + kContract * (vertices_[iw] - centroid);
      const double fcc = eval(xcc);
      if (fcc < fw) {
        replace_worst(xcc, fcc);
      } else {
        shrink = true;
      }
    }
    if (shrink) {
      const Eigen::VectorXd xb = vertices_[ib];
      for (std::size_t k = 0; k < vertices_.size(); ++k) {
        if (k == ib) continue;
        vertices_[k] = xb + kShrink * (vertices_[k] - xb);
        values_[k] = eval(vertices_[k]);
      }
    }
  }
  ++iterations_;
  sort();
}

OptimOutcome nelder_mead(const Objective& f, const Eigen::VectorXd& x0, const OptimizerConfig& config) {
  OptimOutcome out;
  NelderMead nm(f, x0, config);
  out.x_final = x0;
  if (!nm.ok()) {
    out.status = Status::EvaluationFailure;
    out.f_final = std::numeric_limits<double>::quiet_NaN();
    out.function_evals = nm.function_evals();
    return out;
  }
  out.status = Status::MaxIterations;
  if (x0.size() == 0 || nm.converged()) {
    out.status = Status::Converged;
  } else {
    while (nm.iterations() < config.max_iterations) {
      nm.step();
      if (nm.converged()) {
        out.status = Status::Converged;
        break;
      }
    }
  }
  out.x_final = nm.best();
  out.f_final = nm.best_value();
  out.iterations = nm.iterations();
  out.function_evals = nm.function_evals();
  return out;
}

}  // namespace hmmkit::optim
