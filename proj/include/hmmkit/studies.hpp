#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hmmkit/fit.hpp"
#include "hmmkit/optim.hpp"
#include "hmmkit/params.hpp"
#include "hmmkit/simulate.hpp"

namespace hmmkit::studies {

enum class Design { Speed, Accuracy, Robustness, Hybrid };

std::string to_string(Design d);
Design design_from_string(const std::string& name);

struct StudyConfig {
  Design design = Design::Speed;
  NaturalParams truth;
  std::size_t T = 200;
  int replications = 200;  ///< series for speed/accuracy, sampled inits for hybrid
  std::vector<optim::OptimizerConfig> optimizers;
  std::uint64_t seed = 1;
  double nll_margin = 0.05;
  std::size_t grid_size = 5000;  ///< robustness: cap on grid inits (0 = full grid)
  int max_nm_budget = 10000;     ///< hybrid escalation ceiling
  bool parallel = true;
  bool single_worker_timing = false;  ///< run replications serially for low-noise timings

  EmissionSpec spec() const { return truth.spec(); }
  /// Throws ArgumentError naming the offending field.
  void validate() const;
};

struct StudyRecord {
  int replication = 0;  ///< replication id, or grid index for robustness/hybrid
  std::string optimizer_id;
  std::int64_t duration_ns = 0;
  int iterations = 0;
  optim::Status status = optim::Status::EvaluationFailure;
  double nll = 0.0;
  Eigen::VectorXd estimates;  ///< NaturalParams::flatten order, states sorted
  std::optional<bool> found_global;

  bool failed() const;
};

struct Quantiles {
  double q025 = 0.0;
  double median = 0.0;
  double q975 = 0.0;
};

Quantiles quantiles(std::vector<double> values);

/// One-sided sign test: P(X >= wins) for X ~ Binomial(wins + losses, 1/2).
double sign_test_p(int wins, int losses);

// ---------------------------------------------------------------------------
// Initial value grids.

/// Candidate values per component: locations (lambda or mu) on a 0.5 step,
/// ten sigma values between the two moment bounds, and TPM rows whose
/// off-diagonal entries lie on the 0.1 grid with a diagonal of at least 0.1.
struct GridAxes {
  EmissionSpec spec;
  std::vector<double> location;
  std::vector<double> sigma;  ///< empty for Poisson
  std::vector<std::vector<double>> off_diagonals;  ///< per TPM row, entries for j != i in column order

  /// Product of location combinations (strictly increasing), sigma tuples and TPM rows.
  std::uint64_t size() const;
  NaturalParams candidate(std::uint64_t index) const;
};

GridAxes grid_axes(const ObservationSeries& obs, const EmissionSpec& spec);

struct InitGrid {
  std::vector<NaturalParams> candidates;
  std::vector<std::uint64_t> indices;  ///< position of each candidate in the full grid
  std::uint64_t full_size = 0;
};

/// The full grid when it has at most `max_count` entries (or max_count == 0),
/// otherwise a uniform sample without replacement drawn with `seed`.
InitGrid build_init_grid(const ObservationSeries& obs, const EmissionSpec& spec, std::size_t max_count = 0,
                         std::uint64_t seed = 1);

// ---------------------------------------------------------------------------
// Studies.

/// Minimizes from `init`, timing only the optimizer call. No Hessian.
StudyRecord timed_fit(const EmissionSpec& spec, const ObservationSeries& obs, const NaturalParams& init,
                      const optim::OptimizerConfig& config, int replication);

struct OptimizerSummary {
  std::string optimizer_id;
  int count = 0;
  Quantiles duration_ms;
  Quantiles iterations;
};

struct SpeedStudyResult {
  std::vector<StudyRecord> records;  ///< every run, including discarded replications
  std::vector<int> kept;             ///< replication ids where every optimizer converged
  int discarded = 0;
  std::vector<OptimizerSummary> summaries;
};

SpeedStudyResult run_speed_study(const StudyConfig& cfg);

struct ParameterSummary {
  std::string name;
  Quantiles q;
};

struct AccuracySummary {
  std::string optimizer_id;
  int converged = 0;
  std::vector<ParameterSummary> parameters;
  Quantiles nll;
};

struct AccuracyStudyResult {
  std::vector<StudyRecord> records;
  std::vector<AccuracySummary> summaries;
};

AccuracyStudyResult run_accuracy_study(const StudyConfig& cfg);

struct RobustnessSummary {
  std::string optimizer_id;
  int inits = 0;
  int failures = 0;
  int converged = 0;
  int global = 0;
  double failure_pct = 0.0;
  double global_pct = 0.0;  ///< among convergences
};

struct RobustnessStudyResult {
  ObservationSeries data;
  double true_nll = 0.0;
  std::uint64_t full_grid_size = 0;
  std::vector<StudyRecord> truth_records;
  std::vector<StudyRecord> records;
  std::vector<RobustnessSummary> summaries;
};

/// Simulates one series from cfg.truth and fits it from every grid init with
/// every optimizer. The reference nll is the median over runs started at truth.
RobustnessStudyResult run_robustness_study(const StudyConfig& cfg);
RobustnessStudyResult run_robustness_study(const StudyConfig& cfg, const ObservationSeries& data);

struct HybridRow {
  int budget = 0;
  int hybrid_converged = 0;  ///< inits whose escalation first converged at this budget
  int direct_converged = 0;  ///< of those, how many direct Newton also converged
};

struct HybridStudyResult {
  ObservationSeries data;
  int inits = 0;
  std::vector<HybridRow> rows;  ///< budgets with at least one convergence
  int hybrid_failures = 0;
  int direct_failures = 0;
  int both_failed = 0;
  std::vector<StudyRecord> hybrid_records;
  std::vector<StudyRecord> direct_records;
  std::vector<int> converged_budget;  ///< per init, -1 on failure

  double hybrid_failure_pct() const { return inits ? 100.0 * hybrid_failures / inits : 0.0; }
  double direct_failure_pct() const { return inits ? 100.0 * direct_failures / inits : 0.0; }
};

/// cfg.replications grid inits; Nelder-Mead escalation then Newton versus
/// direct Newton (both with supplied gradient and Hessian).
HybridStudyResult run_hybrid_study(const StudyConfig& cfg);
HybridStudyResult run_hybrid_study(const StudyConfig& cfg, const ObservationSeries& data);

}  // namespace hmmkit::studies
