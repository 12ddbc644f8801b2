#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace hmmkit::optim {

enum class Algorithm { NelderMead, BFGS, ConjugateGradient, NewtonType };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);

/// One stopping contract shared by every optimizer so iteration counts are comparable.
struct Tolerances {
  double gradient = 1e-8;    ///< max|g| <= gradient * max(1, |f|)
  double relative_f = 1e-10; ///< |f_old - f_new| <= relative_f * max(|f|, tiny)
  double step = 1e-10;       ///< max|dx| <= step * (1 + max|x|)

  bool operator==(const Tolerances&) const = default;
};

struct OptimizerConfig {
  Algorithm algorithm = Algorithm::NewtonType;
  bool use_supplied_gradient = true;
  bool use_supplied_hessian = true;
  int max_iterations = 10000;
  Tolerances tol;

  /// Hessian supply requires NewtonType; max_iterations >= 1.
  void validate() const;

  /// Short routine name in the R convention: "bfgs_gr", "newton_grhe", "nelder_mead", ...
  std::string id() const;
  static OptimizerConfig from_id(const std::string& id);

  bool operator==(const OptimizerConfig&) const = default;
};

enum class Status { Converged, MaxIterations, EvaluationFailure, LineSearchFailure };

std::string to_string(Status s);

struct OptimOutcome {
  Eigen::VectorXd x_final;
  double f_final = 0.0;
  int iterations = 0;
  int function_evals = 0;   ///< includes finite-difference evaluations
  int fd_function_evals = 0;
  int gradient_evals = 0;
  int hessian_evals = 0;
  Status status = Status::EvaluationFailure;
  std::vector<double> restart_gradient_norms;  ///< conjugate gradient only
};

/// Objective over an unconstrained vector. A value that is not finite, or an
/// EvaluationError thrown from any callback, marks the point as infeasible.
/// Empty gradient/hessian callbacks mean "not supplied".
struct Objective {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> hessian;
};

/// Simplex method with reflection 1, expansion 2, contraction 0.5 and shrink 0.5.
/// The state can be advanced one iteration at a time, which the hybrid scheme uses.
class NelderMead {
 public:
  NelderMead(const Objective& f, const Eigen::VectorXd& x0, const OptimizerConfig& config);

  /// False when f(x0) is not finite; nothing else may be called then.
  bool ok() const { return ok_; }
  void step();
  bool converged() const;
  const Eigen::VectorXd& best() const { return vertices_[order_.front()]; }
  double best_value() const { return values_[order_.front()]; }
  int iterations() const { return iterations_; }
  int function_evals() const { return evals_; }
  double diameter() const;

 private:
  double eval(const Eigen::VectorXd& x);
  void sort();

  const Objective& f_;
  OptimizerConfig config_;
  std::vector<Eigen::VectorXd> vertices_;
  std::vector<double> values_;
  std::vector<std::size_t> order_;
  int iterations_ = 0;
  int evals_ = 0;
  bool ok_ = true;
};

OptimOutcome nelder_mead(const Objective& f, const Eigen::VectorXd& x0, const OptimizerConfig& config);
OptimOutcome bfgs(const Objective& f, const Eigen::VectorXd& x0, const OptimizerConfig& config);
OptimOutcome conjugate_gradient(const Objective& f, const Eigen::VectorXd& x0, const OptimizerConfig& config);
OptimOutcome newton_type(const Objective& f, const Eigen::VectorXd& x0, const OptimizerConfig& config);

/// Dispatch on config.algorithm. Callbacks the config does not request are ignored.
OptimOutcome minimize(const Objective& f, const Eigen::VectorXd& x0, const OptimizerConfig& config);

/// Exactly `nm_budget` Nelder-Mead iterations, then newton_type with the supplied
/// gradient and Hessian from the best vertex. Counts aggregate both phases.
OptimOutcome hybrid(const Objective& f, const Eigen::VectorXd& x0, int nm_budget, const OptimizerConfig& config);

struct EscalationResult {
  OptimOutcome outcome;
  int converged_budget = -1;  ///< first Nelder-Mead budget that led to convergence, -1 if none
  int attempts = 0;
};

/// Budgets 1, 10, 20, ... up to max_budget; the simplex is advanced incrementally
/// between attempts, so budget k+10 continues the budget-k simplex.
EscalationResult hybrid_escalation(const Objective& f, const Eigen::VectorXd& x0, const OptimizerConfig& config,
                                   int max_budget = 10000);

std::vector<int> escalation_budgets(int max_budget);

}  // namespace hmmkit::optim
