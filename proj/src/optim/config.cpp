#include <algorithm>
#include <cctype>

#include "hmmkit/errors.hpp"
#include "hmmkit/optim.hpp"

namespace hmmkit::optim {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::NelderMead: return "nelder_mead";
    case Algorithm::BFGS: return "bfgs";
    case Algorithm::ConjugateGradient: return "cg";
    case Algorithm::NewtonType: return "newton";
  }
  return "unknown";
}

Algorithm algorithm_from_string(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  std::replace(s.begin(), s.end(), '-', '_');
  if (s == "nelder_mead" || s == "neldermead" || s == "nm") return Algorithm::NelderMead;
  if (s == "bfgs") return Algorithm::BFGS;
  if (s == "cg" || s == "conjugate_gradient" || s == "conjugategradient") return Algorithm::ConjugateGradient;
  if (s == "newton" || s == "newton_type" || s == "newtontype" || s == "nlminb") return Algorithm::NewtonType;
  throw ArgumentError("unknown optimizer '" + name + "'");
}

std::string to_string(Status s) {
  switch (s) {
    case Status::Converged: return "converged";
    case Status::MaxIterations: return "max_iterations";
    case Status::EvaluationFailure: return "evaluation_failure";
    case Status::LineSearchFailure: return "line_search_failure";
  }
  return "unknown";
}

void OptimizerConfig::validate() const {
  if (use_supplied_hessian && algorithm != Algorithm::NewtonType) {
    throw ArgumentError("a supplied Hessian is only used by the newton optimizer");
  }
  if (algorithm == Algorithm::NelderMead && use_supplied_gradient) {
    throw ArgumentError("nelder_mead does not use a gradient");
  }
  if (max_iterations < 1) throw ArgumentError("max_iterations must be at least 1");
  if (!(tol.gradient > 0.0) || !(tol.relative_f > 0.0) || !(tol.step > 0.0)) {
    throw ArgumentError("tolerances must be positive");
  }
}

std::string OptimizerConfig::id() const {
  std::string out = to_string(algorithm);
  if (algorithm == Algorithm::NelderMead) return out;
  if (use_supplied_gradient && use_supplied_hessian) return out + "_grhe";
  if (use_supplied_gradient) return out + "_gr";
  if (use_supplied_hessian) return out + "_he";
  return out;
}

OptimizerConfig OptimizerConfig::from_id(const std::string& id) {
  OptimizerConfig c;
  std::string base = id;
  c.use_supplied_gradient = false;
  c.use_supplied_hessian = false;
  auto strip = [&](const std::string& suffix) {
    if (base.size() > suffix.size() && base.compare(base.size() - suffix.size(), suffix.size(), suffix) == 0) {
      base.resize(base.size() - suffix.size());
      return true;
    }
    return false;
  };
  if (strip("_grhe")) {
    c.use_supplied_gradient = c.use_supplied_hessian = true;
  } else if (strip("_gr")) {
    c.use_supplied_gradient = true;
  } else if (strip("_he")) {
    c.use_supplied_hessian = true;
  }
  c.algorithm = algorithm_from_string(base);
  c.validate();
  return c;
}

OptimOutcome minimize(const Objective& f, const Eigen::VectorXd& x0, const OptimizerConfig& config) {
  config.validate();
  switch (config.algorithm) {
    case Algorithm::NelderMead: return nelder_mead(f, x0, config);
    case Algorithm::BFGS: return bfgs(f, x0, config);
    case Algorithm::ConjugateGradient: return conjugate_gradient(f, x0, config);
    case Algorithm::NewtonType: return newton_type(f, x0, config);
  }
  throw ArgumentError("unknown optimizer");
}

}  // namespace hmmkit::optim
