#include "hmmkit/studies.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <unordered_set>

#include "hmmkit/inference.hpp"
#include "hmmkit/parallel.hpp"

namespace hmmkit::studies {

std::string to_string(Design d) {
  switch (d) {
    case Design::Speed: return "speed";
    case Design::Accuracy: return "accuracy";
    case Design::Robustness: return "robustness";
    case Design::Hybrid: return "hybrid";
  }
  return "unknown";
}

Design design_from_string(const std::string& name) {
  if (name == "speed") return Design::Speed;
  if (name == "accuracy") return Design::Accuracy;
  if (name == "robustness") return Design::Robustness;
  if (name == "hybrid") return Design::Hybrid;
  throw ArgumentError("design: unknown study design '" + name + "'");
}

void StudyConfig::validate() const {
  truth.validate();
  if (T < 1) throw ArgumentError("T: series length must be at least 1");
  if (replications < 1) throw ArgumentError("replications: must be at least 1");
  if (!(nll_margin > 0.0 && nll_margin < 1.0)) throw ArgumentError("nll_margin: must lie in (0, 1)");
  if (max_nm_budget < 1) throw ArgumentError("max_nm_budget: must be at least 1");
  if (design != Design::Hybrid && optimizers.empty()) throw ArgumentError("optimizers: list is empty");
  for (const auto& o : optimizers) o.validate();
}

bool StudyRecord::failed() const { return status != optim::Status::Converged || !std::isfinite(nll); }

Quantiles quantiles(std::vector<double> values) {
  if (values.empty()) return {};
  std::sort(values.begin(), values.end());
  return {percentile(values, 0.025), percentile(values, 0.5), percentile(values, 0.975)};
}

double sign_test_p(int wins, int losses) {
  const int n = wins + losses;
  if (n == 0) return 1.0;
  double p = 0.0;
  for (int k = wins; k <= n; ++k) {
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) - n * std::log(2.0));
  }
  return std::min(p, 1.0);
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_mul_overflow(a, b, &r)) throw SizeError("initial value grid is too large to index");
  return r;
}

std::uint64_t choose(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = checked_mul(r, n - k + i) / i;
  return r;
}

std::uint64_t ipow(std::uint64_t b, int e) {
  std::uint64_t r = 1;
  for (int i = 0; i < e; ++i) r = checked_mul(r, b);
  return r;
}

/// k-subset of {0..n-1} with lexicographic rank `rank`.
std::vector<std::size_t> unrank_combination(std::uint64_t rank, std::size_t n, std::size_t k) {
  std::vector<std::size_t> out;
  std::size_t next = 0;
  for (std::size_t slot = 0; slot < k; ++slot) {
    for (std::size_t c = next;; ++c) {
      const std::uint64_t block = choose(n - c - 1, k - slot - 1);
      if (rank < block) {
        out.push_back(c);
        next = c + 1;
        break;
      }
      rank -= block;
    }
  }
  return out;
}

std::vector<double> half_steps(double from, double to) {
  std::vector<double> out;
  for (int k = 0;; ++k) {
    const double v = from + 0.5 * k;
    if (v > to + 1e-9) break;
    out.push_back(v);
  }
  return out;
}

void off_diagonal_tuples(int slots, int remaining_tenths, std::vector<double>& cur,
                         std::vector<std::vector<double>>& out) {
  if (slots == 0) {
    out.push_back(cur);
    return;
  }
  for (int v = 1; v <= remaining_tenths - (slots - 1); ++v) {
    cur.push_back(v / 10.0);
    off_diagonal_tuples(slots - 1, remaining_tenths - v, cur, out);
    cur.pop_back();
  }
}

}  // namespace

GridAxes grid_axes(const ObservationSeries& obs, const EmissionSpec& spec) {
  obs.validate(spec.family);
  if (obs.size() < 2) throw DegenerateData("initial value grid needs at least two observations");
  const auto [lo_it, hi_it] = std::minmax_element(obs.values.begin(), obs.values.end());
  const double x_min = *lo_it;
  const double x_max = *hi_it;
  if (x_max == x_min) throw DegenerateData("all observations are equal; the grid bounds collapse");

  GridAxes ax;
  ax.spec = spec;
  if (spec.family == Family::Poisson) {
    ax.location = half_steps(std::max(0.5, x_min), x_max);
  } else {
    ax.location = half_steps(x_min, x_max);
    const double T = static_cast<double>(obs.size());
    double mean = 0.0;
    for (double x : obs.values) mean += x;
    mean /= T;
    const double lo = std::sqrt((x_max - x_min) * (x_max - x_min) / (2.0 * T));
    const double hi = std::sqrt((x_max - mean) * (mean - x_min));
    const Eigen::VectorXd s = Eigen::VectorXd::LinSpaced(10, lo, hi);
    ax.sigma.assign(s.data(), s.data() + s.size());
  }
  if (ax.location.size() < static_cast<std::size_t>(spec.m)) {
    throw DegenerateData("only " + std::to_string(ax.location.size()) + " location candidates for " +
                         std::to_string(spec.m) + " states");
  }
  std::vector<double> cur;
  off_diagonal_tuples(spec.m - 1, 9, cur, ax.off_diagonals);
  return ax;
}

std::uint64_t GridAxes::size() const {
  std::uint64_t n = choose(location.size(), static_cast<std::uint64_t>(spec.m));
  if (spec.family == Family::Gaussian) n = checked_mul(n, ipow(sigma.size(), spec.m));
  return checked_mul(n, ipow(off_diagonals.size(), spec.m));
}

NaturalParams GridAxes::candidate(std::uint64_t index) const {
  const int m = spec.m;
  const std::uint64_t R = off_diagonals.size();
  Eigen::MatrixXd gamma(m, m);
  for (int i = m - 1; i >= 0; --i) {
    const auto& off = off_diagonals[index % R];
    index /= R;
    double s = 0.0;
    for (int j = 0, k = 0; j < m; ++j) {
      if (j == i) continue;
      gamma(i, j) = off[static_cast<std::size_t>(k++)];
      s += gamma(i, j);
    }
    gamma(i, i) = 1.0 - s;
  }
  Eigen::VectorXd sig(m);
  if (spec.family == Family::Gaussian) {
    const std::uint64_t S = sigma.size();
    for (int i = m - 1; i >= 0; --i) {
      sig[i] = sigma[index % S];
      index /= S;
    }
  }
  const auto comb = unrank_combination(index, location.size(), static_cast<std::size_t>(m));
  Eigen::VectorXd loc(m);
  for (int i = 0; i < m; ++i) loc[i] = location[comb[static_cast<std::size_t>(i)]];
  return spec.family == Family::Poisson ? NaturalParams::poisson(gamma, loc) : NaturalParams::gaussian(gamma, loc, sig);
}

InitGrid build_init_grid(const ObservationSeries& obs, const EmissionSpec& spec, std::size_t max_count,
                         std::uint64_t seed) {
  const GridAxes ax = grid_axes(obs, spec);
  InitGrid grid;
  grid.full_size = ax.size();
  if (max_count == 0 || grid.full_size <= max_count) {
    grid.indices.resize(grid.full_size);
    for (std::uint64_t i = 0; i < grid.full_size; ++i) grid.indices[i] = i;
  } else {
    // Floyd's algorithm: a uniform k-subset without touching the full range
    std::mt19937_64 rng(seed);
    std::unordered_set<std::uint64_t> chosen;
    const std::uint64_t N = grid.full_size;
    for (std::uint64_t j = N - max_count; j < N; ++j) {
      const std::uint64_t t = std::uniform_int_distribution<std::uint64_t>(0, j)(rng);
      if (!chosen.insert(t).second) chosen.insert(j);
    }
    grid.indices.assign(chosen.begin(), chosen.end());
    std::sort(grid.indices.begin(), grid.indices.end());
  }
  grid.candidates.reserve(grid.indices.size());
  for (std::uint64_t i : grid.indices) grid.candidates.push_back(ax.candidate(i));
  return grid;
}

// ---------------------------------------------------------------------------

namespace {

StudyRecord record_from(const FitResult& r, std::int64_t ns, int replication) {
  StudyRecord rec;
  rec.replication = replication;
  rec.optimizer_id = r.optimizer_id;
  rec.duration_ns = ns;
  rec.iterations = r.iterations;
  rec.status = r.status;
  rec.nll = r.nll;
  if (r.natural_hat.gamma.size() > 0) rec.estimates = r.natural_hat.flatten();
  return rec;
}

template <class Body>
void for_each_index(int n, bool parallel, Body body) {
  if (parallel) {
#pragma omp parallel for schedule(dynamic) num_threads(worker_count())
    for (int i = 0; i < n; ++i) body(i);
  } else {
    for (int i = 0; i < n; ++i) body(i);
  }
}

SimulatedSeries replication_series(const StudyConfig& cfg, int replication) {
  std::mt19937_64 rng = replication_rng(cfg.seed, static_cast<std::uint64_t>(replication));
  return simulate_visiting_all(cfg.truth, cfg.T, rng);
}

ObservationSeries study_data(const StudyConfig& cfg) {
  std::mt19937_64 rng = replication_rng(cfg.seed, 0xda7aULL);
  return simulate_visiting_all(cfg.truth, cfg.T, rng).obs;
}

}  // namespace

StudyRecord timed_fit(const EmissionSpec& spec, const ObservationSeries& obs, const NaturalParams& init,
                      const optim::OptimizerConfig& config, int replication) {
  const WorkingParams w0 = working_from_natural(init, spec);
  const optim::Objective f = make_objective(obs, spec);
  const auto start = std::chrono::steady_clock::now();
  const optim::OptimOutcome out = optim::minimize(f, w0.values, config);
  const auto stop = std::chrono::steady_clock::now();
  const FitResult r = finalize_fit(spec, obs, out, config.id(), false);
  return record_from(r, std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count(), replication);
}

SpeedStudyResult run_speed_study(const StudyConfig& cfg) {
  cfg.validate();
  const EmissionSpec spec = cfg.spec();
  const int R = cfg.replications;
  const auto K = cfg.optimizers.size();
  std::vector<StudyRecord> records(static_cast<std::size_t>(R) * K);
  for_each_index(R, cfg.parallel && !cfg.single_worker_timing, [&](int r) {
    const SimulatedSeries sim = replication_series(cfg, r);
    for (std::size_t k = 0; k < K; ++k) {
      records[static_cast<std::size_t>(r) * K + k] = timed_fit(spec, sim.obs, cfg.truth, cfg.optimizers[k], r);
    }
  });

  SpeedStudyResult res;
  res.records = std::move(records);
  for (int r = 0; r < R; ++r) {
    bool all_ok = true;
    for (std::size_t k = 0; k < K; ++k) all_ok = all_ok && !res.records[static_cast<std::size_t>(r) * K + k].failed();
    if (all_ok) {
      res.kept.push_back(r);
    } else {
      ++res.discarded;
    }
  }
  if (res.kept.empty()) throw StudyDegenerate("every replication had at least one failed optimizer");
  for (std::size_t k = 0; k < K; ++k) {
    OptimizerSummary s;
    s.optimizer_id = cfg.optimizers[k].id();
    std::vector<double> ms;
    std::vector<double> its;
    for (int r : res.kept) {
      const auto& rec = res.records[static_cast<std::size_t>(r) * K + k];
      ms.push_back(static_cast<double>(rec.duration_ns) * 1e-6);
      its.push_back(rec.iterations);
    }
    s.count = static_cast<int>(ms.size());
    s.duration_ms = quantiles(ms);
    s.iterations = quantiles(its);
    res.summaries.push_back(s);
  }
  return res;
}

AccuracyStudyResult run_accuracy_study(const StudyConfig& cfg) {
  cfg.validate();
  const EmissionSpec spec = cfg.spec();
  const int R = cfg.replications;
  const auto K = cfg.optimizers.size();
  AccuracyStudyResult res;
  res.records.resize(static_cast<std::size_t>(R) * K);
  for_each_index(R, cfg.parallel, [&](int r) {
    const SimulatedSeries sim = replication_series(cfg, r);
    for (std::size_t k = 0; k < K; ++k) {
      res.records[static_cast<std::size_t>(r) * K + k] = timed_fit(spec, sim.obs, cfg.truth, cfg.optimizers[k], r);
    }
  });
  const auto names = cfg.truth.names();
  bool any = false;
  for (std::size_t k = 0; k < K; ++k) {
    AccuracySummary s;
    s.optimizer_id = cfg.optimizers[k].id();
    std::vector<std::vector<double>> cols(names.size());
    std::vector<double> nlls;
    for (int r = 0; r < R; ++r) {
      const auto& rec = res.records[static_cast<std::size_t>(r) * K + k];
      if (rec.failed()) continue;
      ++s.converged;
      nlls.push_back(rec.nll);
      for (std::size_t j = 0; j < names.size(); ++j) cols[j].push_back(rec.estimates[static_cast<Eigen::Index>(j)]);
    }
    any = any || s.converged > 0;
    for (std::size_t j = 0; j < names.size(); ++j) s.parameters.push_back({names[j], quantiles(cols[j])});
    s.nll = quantiles(nlls);
    res.summaries.push_back(std::move(s));
  }
  if (!any) throw StudyDegenerate("no optimizer converged in any replication");
  return res;
}

RobustnessStudyResult run_robustness_study(const StudyConfig& cfg) { return run_robustness_study(cfg, study_data(cfg)); }

RobustnessStudyResult run_robustness_study(const StudyConfig& cfg, const ObservationSeries& data) {
  cfg.validate();
  const EmissionSpec spec = cfg.spec();
  const auto K = cfg.optimizers.size();
  RobustnessStudyResult res;
  res.data = data;

  res.truth_records.resize(K);
  for_each_index(static_cast<int>(K), cfg.parallel, [&](int k) {
    res.truth_records[static_cast<std::size_t>(k)] =
        timed_fit(spec, data, cfg.truth, cfg.optimizers[static_cast<std::size_t>(k)], -1);
  });
  std::vector<double> truth_nlls;
  for (const auto& rec : res.truth_records) {
    if (!rec.failed()) truth_nlls.push_back(rec.nll);
  }
  if (truth_nlls.empty()) throw StudyDegenerate("no optimizer converged from the true parameters");
  res.true_nll = quantiles(truth_nlls).median;
  const double margin = cfg.nll_margin * std::abs(res.true_nll);
  for (auto& rec : res.truth_records) {
    if (!rec.failed()) rec.found_global = std::abs(rec.nll - res.true_nll) <= margin;
  }

  const InitGrid grid = build_init_grid(data, spec, cfg.grid_size, cfg.seed);
  res.full_grid_size = grid.full_size;
  const int N = static_cast<int>(grid.candidates.size());
  res.records.resize(static_cast<std::size_t>(N) * K);
  for_each_index(N, cfg.parallel, [&](int g) {
    for (std::size_t k = 0; k < K; ++k) {
      StudyRecord rec = timed_fit(spec, data, grid.candidates[static_cast<std::size_t>(g)], cfg.optimizers[k],
                                  static_cast<int>(grid.indices[static_cast<std::size_t>(g)]));
      if (!rec.failed()) rec.found_global = std::abs(rec.nll - res.true_nll) <= margin;
      res.records[static_cast<std::size_t>(g) * K + k] = std::move(rec);
    }
  });

  for (std::size_t k = 0; k < K; ++k) {
    RobustnessSummary s;
    s.optimizer_id = cfg.optimizers[k].id();
    s.inits = N;
    for (int g = 0; g < N; ++g) {
      const auto& rec = res.records[static_cast<std::size_t>(g) * K + k];
      if (rec.failed()) {
        ++s.failures;
      } else {
        ++s.converged;
        if (*rec.found_global) ++s.global;
      }
    }
    s.failure_pct = N ? 100.0 * s.failures / N : 0.0;
    s.global_pct = s.converged ? 100.0 * s.global / s.converged : 0.0;
    res.summaries.push_back(s);
  }
  return res;
}

HybridStudyResult run_hybrid_study(const StudyConfig& cfg) { return run_hybrid_study(cfg, study_data(cfg)); }

HybridStudyResult run_hybrid_study(const StudyConfig& cfg, const ObservationSeries& data) {
  cfg.validate();
  const EmissionSpec spec = cfg.spec();
  optim::OptimizerConfig newton;  // supplied gradient and Hessian
  const InitGrid grid = build_init_grid(data, spec, static_cast<std::size_t>(cfg.replications), cfg.seed);
  const int N = static_cast<int>(grid.candidates.size());

  HybridStudyResult res;
  res.data = data;
  res.inits = N;
  res.hybrid_records.resize(static_cast<std::size_t>(N));
  res.direct_records.resize(static_cast<std::size_t>(N));
  res.converged_budget.assign(static_cast<std::size_t>(N), -1);
  const optim::Objective f = make_objective(data, spec);

  for_each_index(N, cfg.parallel, [&](int g) {
    const auto gi = static_cast<std::size_t>(g);
    const int id = static_cast<int>(grid.indices[gi]);
    const Eigen::VectorXd x0 = working_from_natural(grid.candidates[gi], spec).values;

    auto start = std::chrono::steady_clock::now();
    const optim::EscalationResult esc = optim::hybrid_escalation(f, x0, newton, cfg.max_nm_budget);
    auto stop = std::chrono::steady_clock::now();
    FitResult hr = finalize_fit(spec, data, esc.outcome, "hybrid", false);
    res.hybrid_records[gi] = record_from(hr, std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count(), id);
    res.converged_budget[gi] = res.hybrid_records[gi].failed() ? -1 : esc.converged_budget;

    start = std::chrono::steady_clock::now();
    const optim::OptimOutcome direct = optim::newton_type(f, x0, newton);
    stop = std::chrono::steady_clock::now();
    FitResult dr = finalize_fit(spec, data, direct, newton.id(), false);
    res.direct_records[gi] = record_from(dr, std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count(), id);
  });

  std::vector<HybridRow> rows;
  for (int budget : optim::escalation_budgets(cfg.max_nm_budget)) rows.push_back({budget, 0, 0});
  for (int g = 0; g < N; ++g) {
    const auto gi = static_cast<std::size_t>(g);
    const bool direct_ok = !res.direct_records[gi].failed();
    if (!direct_ok) ++res.direct_failures;
    const int b = res.converged_budget[gi];
    if (b < 0) {
      ++res.hybrid_failures;
      if (!direct_ok) ++res.both_failed;
      continue;
    }
    const std::size_t slot = b == 1 ? 0 : static_cast<std::size_t>(b / 10);
    ++rows[slot].hybrid_converged;
    if (direct_ok) ++rows[slot].direct_converged;
  }
  for (const auto& r : rows) {
    if (r.hybrid_converged > 0) res.rows.push_back(r);
  }
  return res;
}

}  // namespace hmmkit::studies
