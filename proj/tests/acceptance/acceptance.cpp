// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Oracles (path enumeration, finite differences, the simulator used for data)
// come from test_support.hpp and do not call the recursions they check.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hmmkit/ad.hpp"
#include "hmmkit/fit.hpp"
#include "hmmkit/inference.hpp"
#include "hmmkit/likelihood.hpp"
#include "hmmkit/simulate.hpp"
#include "hmmkit/studies.hpp"
#include "test_support.hpp"

using namespace hmmkit;
namespace t = hmmkit::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::span<const double> as_span(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

NaturalParams poisson_truth() { return NaturalParams::poisson(t::tpm2(0.05, 0.15), Eigen::Vector2d(1.0, 7.0)); }

/// Sum over every state path of delta P(x1) Gamma P(x2) ..., written per path.
double enumerated_likelihood(const NaturalParams& n, const ObservationSeries& obs) {
  const int m = n.states();
  const std::size_t T = obs.size();
  std::vector<int> path(T, 0);
  double total = 0.0;
  for (;;) {
    double p = n.delta[path[0]] * t::density(n, path[0], obs[0]);
    for (std::size_t s = 1; s < T; ++s) p *= n.gamma(path[s - 1], path[s]) * t::density(n, path[s], obs[s]);
    total += p;
    std::size_t pos = 0;
    while (pos < T && ++path[pos] == m) path[pos++] = 0;
    if (pos == T) break;
  }
  return total;
}

struct Report {
  bool pass = true;
  std::string detail;
};

void note(Report& r, const char* fmt, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, a, b, c, d);
  if (!r.detail.empty()) r.detail += "; ";
  r.detail += buf;
}

Report likelihood_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> pick_m(1, 3);
  std::uniform_int_distribution<int> pick_T(1, 8);
  double worst = 0.0;
  for (int k = 0; k < 500; ++k) {
    const Family family = (k % 2 == 0) ? Family::Poisson : Family::Gaussian;
    const NaturalParams n = t::random_natural(rng, family, pick_m(rng));
    const ObservationSeries obs = t::draw_series(rng, n, static_cast<std::size_t>(pick_T(rng)));
    const EmissionSpec spec = n.spec();
    const double f = nll(working_from_natural(n, spec), obs, spec);
    // likelihood ratio minus one
    worst = std::max(worst, std::abs(std::expm1(std::log(enumerated_likelihood(n, obs)) + f)));
  }
  const double secs = seconds_since(t0);
  Report r;
  r.pass = worst <= 1e-10 && secs < 10.0;
  note(r, "max |L_fwd/L_enum - 1| = %.2e (tol 1e-10), %.1f s (limit 10 s)", worst, secs);
  return r;
}

Report derivative_exactness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> pick_m(1, 3);
  double worst_g = 0.0;
  double worst_h = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Family family = (k % 2 == 0) ? Family::Poisson : Family::Gaussian;
    const NaturalParams n = t::random_natural(rng, family, pick_m(rng));
    const ObservationSeries obs = t::draw_series(rng, n, 50);
    const EmissionSpec spec = n.spec();
    const WorkingParams w = working_from_natural(n, spec);
    const auto fn = make_nll_function(obs, spec);
    const auto plain = [&](const Eigen::VectorXd& y) { return ad::value(fn, as_span(y)); };
    const Eigen::VectorXd fd = t::central_gradient(plain, w.values);
    const Eigen::VectorXd g = ad::gradient(fn, w.span()).gradient;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      worst_g = std::max(worst_g, std::abs(g[i] - fd[i]) / std::max(1.0, std::abs(fd[i])));
    }
    const auto gfun = [&](const Eigen::VectorXd& y) { return Eigen::VectorXd(ad::gradient(fn, as_span(y)).gradient); };
    const Eigen::MatrixXd hfd = t::central_jacobian(gfun, w.values);
    const Eigen::MatrixXd h = ad::hessian(fn, w.span()).hessian;
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
      for (Eigen::Index j = 0; j < h.cols(); ++j) {
        worst_h = std::max(worst_h, std::abs(h(i, j) - hfd(i, j)) / std::max(1.0, std::abs(hfd(i, j))));
      }
    }
  }
  const double secs = seconds_since(t0);
  Report r;
  r.pass = worst_g <= 1e-6 && worst_h <= 1e-5 && secs < 60.0;
  note(r, "gradient rel err %.2e (tol 1e-6), Hessian rel err %.2e (tol 1e-5), %.1f s (limit 60 s)", worst_g, worst_h,
       secs);
  return r;
}

Report smoothing_oracle() {
  std::mt19937_64 rng(303);
  double worst = 0.0;
  double worst_sum = 0.0;
  int instances = 0;
  for (int m = 1; m <= 3; ++m) {
    const int t_max = static_cast<int>(std::floor(std::log(1e5) / std::log(std::max(m, 2)) + 1e-12));
    const int t_cap = (m == 1) ? 20 : t_max;
    for (int T = 1; T <= t_cap; ++T) {
      for (const Family family : {Family::Poisson, Family::Gaussian}) {
        const NaturalParams n = t::random_natural(rng, family, m);
        const ObservationSeries obs = t::draw_series(rng, n, static_cast<std::size_t>(T));
        const Eigen::MatrixXd probs = smoothing_probabilities(n, obs);
        const Eigen::MatrixXd post = t::enumerated_posterior(n, obs);
        worst = std::max(worst, (probs - post.transpose()).cwiseAbs().maxCoeff());
        for (Eigen::Index c = 0; c < probs.cols(); ++c) worst_sum = std::max(worst_sum, std::abs(probs.col(c).sum() - 1.0));
        ++instances;
      }
    }
  }
  Report r;
  r.pass = worst <= 1e-10 && worst_sum <= 1e-10;
  note(r, "%.0f instances with m^T <= 1e5: max |p - p_enum| = %.2e (tol 1e-10), max |colsum - 1| = %.2e (tol 1e-10)",
       instances, worst, worst_sum);
  return r;
}

Report delta_method() {
  Report r;
  const ConfidenceInterval ci = wald_ci(1.64, 0.278, 0.95);
  const double dl = std::abs(ci.lower - 1.09);
  const double du = std::abs(ci.upper - 2.18);
  note(r, "wald_ci(1.64, 0.278) = [%.4f, %.4f], offsets %.4f / %.4f (tol 0.01)", ci.lower, ci.upper, dl, du);

  const NaturalParams truth = poisson_truth();
  const SimulatedSeries sim = simulate(truth, 150, 404);
  const FitResult f = fit(truth.spec(), sim.obs, truth, optim::OptimizerConfig{});
  double worst = INFINITY;
  if (f.converged) {
    const SmoothingReport rep = smoothing_with_uncertainty(f, sim.obs);
    const EmissionSpec spec = f.spec;
    const auto probs = [&](const Eigen::VectorXd& w) {
      const auto s = kernels::smoothing<double>(as_span(w), sim.obs, spec);
      return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size())));
    };
    const Eigen::MatrixXd J = t::central_jacobian(probs, f.working_hat.values, 1e-5);
    const Eigen::MatrixXd cov = f.hessian_working.inverse();
    worst = 0.0;
    for (Eigen::Index s = 0; s < static_cast<Eigen::Index>(sim.obs.size()); ++s) {
      for (Eigen::Index i = 0; i < 2; ++i) {
        const Eigen::RowVectorXd row = J.row(s * 2 + i);
        const double se = std::sqrt(std::max(0.0, (row * cov * row.transpose())(0, 0)));
        worst = std::max(worst, std::abs(se - rep.se(i, s)));
      }
    }
  }
  note(r, "smoothing SE vs finite-difference delta method: max abs diff %.2e (tol 1e-4)", worst);
  r.pass = dl <= 0.01 && du <= 0.01 && worst <= 1e-4;
  return r;
}

Report estimation_recovery() {
  const auto t0 = Clock::now();
  studies::StudyConfig cfg;
  cfg.design = studies::Design::Accuracy;
  cfg.truth = poisson_truth();
  cfg.T = 200;
  cfg.replications = 200;
  cfg.seed = 505;
  cfg.optimizers = {optim::OptimizerConfig::from_id("newton_grhe")};
  const auto res = studies::run_accuracy_study(cfg);
  const double secs = seconds_since(t0);
  const auto& s = res.summaries.front();
  const Eigen::VectorXd truth = cfg.truth.flatten();
  const auto names = cfg.truth.names();
  double lambda_dev = 0.0;
  double gamma_dev = 0.0;
  for (std::size_t j = 0; j < names.size(); ++j) {
    const double dev = std::abs(s.parameters[j].q.median - truth[static_cast<Eigen::Index>(j)]);
    if (names[j].rfind("lambda", 0) == 0) lambda_dev = std::max(lambda_dev, dev);
    if (names[j].rfind("gamma", 0) == 0) gamma_dev = std::max(gamma_dev, dev);
  }
  const double rate = 100.0 * s.converged / cfg.replications;
  Report r;
  r.pass = rate >= 95.0 && lambda_dev <= 0.25 && gamma_dev <= 0.05 && secs < 300.0;
  note(r, "converged %.1f%% (floor 95%%), max |median lambda - truth| %.3f (tol 0.25), max |median gamma - truth| %.4f "
       "(tol 0.05), %.1f s (limit 300 s)", rate, lambda_dev, gamma_dev, secs);
  return r;
}

Report optimizer_efficiency() {
  studies::StudyConfig cfg;
  cfg.design = studies::Design::Speed;
  cfg.truth = poisson_truth();
  cfg.T = 200;
  cfg.replications = 200;
  cfg.seed = 606;
  cfg.optimizers = {optim::OptimizerConfig::from_id("newton_grhe"), optim::OptimizerConfig::from_id("newton")};
  const auto res = studies::run_speed_study(cfg);
  int le = 0;
  int wins = 0;
  int losses = 0;
  for (int rep : res.kept) {
    const auto& a = res.records[static_cast<std::size_t>(rep) * 2];
    const auto& b = res.records[static_cast<std::size_t>(rep) * 2 + 1];
    if (a.iterations <= b.iterations) ++le;
    if (a.iterations < b.iterations) ++wins;
    if (a.iterations > b.iterations) ++losses;
  }
  const int pairs = static_cast<int>(res.kept.size());
  const double p = studies::sign_test_p(wins, losses);
  Report r;
  r.pass = pairs > 0 && 2 * le > pairs && p < 0.05;
  note(r, "%.0f pairs: grad+hess <= finite-difference in %.0f, strict wins %.0f vs losses %.0f", pairs, le, wins, losses);
  note(r, "sign test p = %.2e (need < 0.05)", p);
  return r;
}

Report robustness() {
  const auto t0 = Clock::now();
  studies::StudyConfig cfg;
  cfg.design = studies::Design::Robustness;
  cfg.truth = poisson_truth();
  cfg.T = 200;
  cfg.seed = 707;
  cfg.grid_size = 1000;
  for (const char* id : {"nelder_mead", "bfgs", "bfgs_gr", "cg", "cg_gr", "newton", "newton_gr", "newton_grhe"}) {
    cfg.optimizers.push_back(optim::OptimizerConfig::from_id(id));
  }
  const auto res = studies::run_robustness_study(cfg);
  const std::size_t K = cfg.optimizers.size();
  Report r;
  bool partition = res.records.size() == K * static_cast<std::size_t>(res.summaries.front().inits);
  double worst_global = 100.0;
  for (std::size_t k = 0; k < K; ++k) {
    const auto& s = res.summaries[k];
    int failed = 0;
    int global = 0;
    for (int g = 0; g < s.inits; ++g) {
      const auto& rec = res.records[static_cast<std::size_t>(g) * K + k];
      failed += rec.failed() ? 1 : 0;
      global += (rec.found_global && *rec.found_global) ? 1 : 0;
      partition = partition && (rec.failed() != rec.found_global.has_value());
    }
    partition = partition && s.inits == cfg.grid_size && failed == s.failures && s.failures + s.converged == s.inits &&
                global == s.global && s.global <= s.converged;
    worst_global = std::min(worst_global, s.global_pct);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s fail %.1f%% global %.1f%%", s.optimizer_id.c_str(), s.failure_pct, s.global_pct);
    r.detail += (k ? ", " : "") + std::string(buf);
  }
  r.pass = partition && worst_global >= 90.0;
  note(r, "%.0f of %.0f grid inits", static_cast<double>(cfg.grid_size), static_cast<double>(res.full_grid_size));
  r.detail += partition ? ", partition exact" : ", partition BROKEN";
  note(r, "lowest global rate %.1f%% (floor 90%%), %.1f s", worst_global, seconds_since(t0));
  return r;
}

Report hybrid_advantage() {
  const auto t0 = Clock::now();
  Eigen::Matrix3d g;
  g << 0.9, 0.05, 0.05, 0.1, 0.8, 0.1, 0.05, 0.15, 0.8;
  studies::StudyConfig cfg;
  cfg.design = studies::Design::Hybrid;
  cfg.truth = NaturalParams::gaussian(g, Eigen::Vector3d(-2.0, 0.0, 3.0), Eigen::Vector3d(1.0, 0.5, 1.5));
  cfg.T = 200;
  cfg.replications = 300;
  cfg.seed = 7;
  const auto res = studies::run_hybrid_study(cfg);
  const double secs = seconds_since(t0);
  const double gap = res.direct_failure_pct() - res.hybrid_failure_pct();
  Report r;
  r.pass = res.inits == 300 && gap >= 3.0 && secs < 600.0;
  note(r, "%.0f inits: hybrid failures %.2f%%, direct Newton failures %.2f%%, gap %.2f pp (need >= 3)", res.inits,
       res.hybrid_failure_pct(), res.direct_failure_pct(), gap);
  note(r, "%.1f s (limit 600 s)", secs);
  return r;
}

Report bootstrap() {
  const NaturalParams truth = poisson_truth();
  const SimulatedSeries sim = simulate(truth, 200, 909);
  FitResult f = fit(truth.spec(), sim.obs, truth, optim::OptimizerConfig{});
  Report r;
  if (!f.converged) {
    r.pass = false;
    r.detail = "fit did not converge";
    return r;
  }
  BootstrapOptions opt;
  opt.B = 200;
  opt.seed = 99;
  const BootstrapResult b = parametric_bootstrap(f, opt);
  const auto rows = wald_table(f, 0.95);
  bool covered = true;
  double worst_ratio = 1.0;
  for (int i = 0; i < 2; ++i) {
    const double lambda = truth.lambda[i];
    covered = covered && b.lower[i] <= lambda && lambda <= b.upper[i];
    const auto& w = rows[static_cast<std::size_t>(i)];
    const double ratio = (b.upper[i] - b.lower[i]) / (w.upper - w.lower);
    worst_ratio = std::max(worst_ratio, std::max(ratio, 1.0 / ratio));
    note(r, "lambda%.0f boot [%.3f, %.3f] wald width ratio %.3f", i + 1.0, b.lower[i], b.upper[i], ratio);
  }
  r.pass = covered && worst_ratio <= 1.5;
  note(r, "%.0f of %.0f refits ok; worst width factor %.3f (limit 1.5)", static_cast<double>(b.estimates.rows()),
       b.requested, worst_ratio);
  return r;
}

Report model_selection() {
  const NaturalParams one = NaturalParams::poisson(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Constant(1, 4.0));
  const NaturalParams two = poisson_truth();
  int hits[2] = {0, 0};
  for (int seed = 0; seed < 50; ++seed) {
    int c = 0;
    for (const NaturalParams* truth : {&one, &two}) {
      const SimulatedSeries sim = simulate(*truth, 200, 1000 + static_cast<std::uint64_t>(seed));
      const Selection sel = select_states(sim.obs, Family::Poisson, 1, 3, optim::OptimizerConfig{});
      if (sel.best_bic >= 0 && sel.rows[static_cast<std::size_t>(sel.best_bic)].m == truth->states()) ++hits[c];
      ++c;
    }
  }
  Report r;
  r.pass = hits[0] >= 45 && hits[1] >= 45;
  note(r, "BIC picks m=1 in %.0f/50, m=2 in %.0f/50 (floor 45)", hits[0], hits[1]);
  return r;
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Report()>>> criteria = {
      {1, likelihood_oracle}, {2, derivative_exactness}, {3, smoothing_oracle}, {4, delta_method},
      {5, estimation_recovery}, {6, optimizer_efficiency}, {7, robustness}, {8, hybrid_advantage},
      {9, bootstrap}, {10, model_selection}};
  int failures = 0;
  for (const auto& [id, run] : criteria) {
    Report r;
    try {
      r = run();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    failures += r.pass ? 0 : 1;
    std::printf("criterion %d: %s  %s\n", id, r.pass ? "PASS" : "FAIL", r.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
