#include <limits>

#include "hmmkit/errors.hpp"
#include "hmmkit/optim.hpp"

namespace hmmkit::optim {

namespace {

OptimizerConfig newton_phase(const OptimizerConfig& config) {
  OptimizerConfig c = config;
  c.algorithm = Algorithm::NewtonType;
  c.use_supplied_gradient = true;
  c.use_supplied_hessian = true;
  return c;
}

OptimOutcome finish(const NelderMead& nm, const Objective& f, const OptimizerConfig& config) {
  OptimOutcome out = newton_type(f, nm.best(), newton_phase(config));
  out.iterations += nm.iterations();
  out.function_evals += nm.function_evals();
  return out;
}

OptimOutcome failed_start(const NelderMead& nm, const Eigen::VectorXd& x0) {
  OptimOutcome out;
  out.x_final = x0;
  out.f_final = std::numeric_limits<double>::quiet_NaN();
  out.function_evals = nm.function_evals();
  out.status = Status::EvaluationFailure;
  return out;
}

}  // namespace

OptimOutcome hybrid(const Objective& f, const Eigen::VectorXd& x0, int nm_budget, const OptimizerConfig& config) {
  if (nm_budget < 1) throw ArgumentError("nm_budget must be at least 1");
  NelderMead nm(f, x0, config);
  if (!nm.ok()) return failed_start(nm, x0);
  if (x0.size() > 0) {
    while (nm.iterations() < nm_budget) nm.step();
  }
  return finish(nm, f, config);
}

std::vector<int> escalation_budgets(int max_budget) {
  std::vector<int> out;
  if (max_budget < 1) return out;
  out.push_back(1);
  for (int b = 10; b <= max_budget; b += 10) out.push_back(b);
  return out;
}

EscalationResult hybrid_escalation(const Objective& f, const Eigen::VectorXd& x0, const OptimizerConfig& config,
                                   int max_budget) {
  EscalationResult res;
  NelderMead nm(f, x0, config);
  if (!nm.ok()) {
    res.outcome = failed_start(nm, x0);
    return res;
  }
  for (int budget : escalation_budgets(max_budget)) {
    if (x0.size() > 0) {
      while (nm.iterations() < budget) nm.step();
    }
    res.outcome = finish(nm, f, config);
    ++res.attempts;
    if (res.outcome.status == Status::Converged) {
      res.converged_budget = budget;
      break;
    }
  }
  return res;
}

}  // namespace hmmkit::optim
