#include <cmath>
#include <random>

#include "doctest.h"
#include "hmmkit/fit.hpp"
#include "hmmkit/inference.hpp"
#include "hmmkit/simulate.hpp"
#include "test_support.hpp"

using namespace hmmkit;
namespace t = hmmkit::testing;

namespace {

NaturalParams poisson_truth() { return NaturalParams::poisson(t::tpm2(0.05, 0.15), Eigen::Vector2d(1.0, 7.0)); }

FitResult fitted(const NaturalParams& truth, const ObservationSeries& obs) {
  return fit(truth.spec(), obs, truth, optim::OptimizerConfig{});
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("normal quantile inverts the normal cdf") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-7));
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  for (double p : {1e-10, 1e-4, 0.01, 0.1, 0.3, 0.7, 0.95, 0.999, 1.0 - 1e-9}) {
    const double z = normal_quantile(p);
    CHECK(std::abs(std_normal_cdf(z) - p) <= 1e-12 * std::max(1.0, p / (1.0 - p)));
    // 1 - p is only exact away from the tails
    if (p >= 1e-4 && p <= 1.0 - 1e-4) CHECK(normal_quantile(1.0 - p) == doctest::Approx(-z).epsilon(1e-9));
  }
}

TEST_CASE("wald intervals") {
  const auto ci = wald_ci(1.64, 0.278, 0.95);
  CHECK(std::abs(ci.lower - 1.09) <= 0.01);
  CHECK(std::abs(ci.upper - 2.18) <= 0.01);

  const auto clipped = wald_ci(0.05, 0.1, 0.95, Bounds{0.0, 1.0});
  CHECK(clipped.lower == 0.0);
  CHECK(clipped.upper == doctest::Approx(0.05 + 1.959964 * 0.1).epsilon(1e-6));
  const auto top = wald_ci(0.99, 0.2, 0.9, Bounds{0.0, 1.0});
  CHECK(top.upper == 1.0);
  CHECK(top.lower <= top.estimate);

  CHECK_THROWS_AS(wald_ci(1.0, 0.1, 1.0), ArgumentError);
  CHECK_THROWS_AS(wald_ci(1.0, -0.1, 0.95), ArgumentError);
  CHECK_THROWS_AS(wald_ci(1.0, std::nan(""), 0.95), ArgumentError);
}

TEST_CASE("single-state standard errors follow Fisher information") {
  {
    const ObservationSeries obs({2, 2, 2});
    const auto init = NaturalParams::poisson(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Constant(1, 1.0));
    FitResult r = fit(init.spec(), obs, init, optim::OptimizerConfig{});
    REQUIRE(r.converged);
    const auto rows = wald_table(r, 0.95);
    CHECK(rows[0].name == "lambda1");
    CHECK(rows[0].estimate == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(rows[0].se == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-8));
  }
  {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> nd(3.0, 2.0);
    std::vector<double> x(400);
    for (double& v : x) v = nd(rng);
    const ObservationSeries obs(x);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= 400.0;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double s = std::sqrt(ss / 400.0);
    const auto init = NaturalParams::gaussian(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Constant(1, 0.0),
                                              Eigen::VectorXd::Constant(1, 1.0));
    FitResult r = fit(init.spec(), obs, init, optim::OptimizerConfig{});
    REQUIRE(r.converged);
    const auto rows = wald_table(r);
    // the stopping rule allows |g| up to 1e-8 |f|, i.e. estimates off by ~1e-8
    CHECK(rows[0].estimate == doctest::Approx(mean).epsilon(1e-7));
    CHECK(rows[1].estimate == doctest::Approx(s).epsilon(1e-7));
    CHECK(rows[0].se == doctest::Approx(s / std::sqrt(400.0)).epsilon(1e-7));
    CHECK(rows[1].se == doctest::Approx(s / std::sqrt(800.0)).epsilon(1e-7));
  }
}

TEST_CASE("natural covariance respects the simplex constraints") {
  const NaturalParams truth = poisson_truth();
  const auto sim = simulate(truth, 300, 12);
  FitResult r = fitted(truth, sim.obs);
  REQUIRE(r.converged);
  const Eigen::MatrixXd c = covariance_natural(r);
  CHECK((c - c.transpose()).cwiseAbs().maxCoeff() == 0.0);
  // gamma11 + gamma12 and delta1 + delta2 are constant, so their variance vanishes
  Eigen::VectorXd a = Eigen::VectorXd::Zero(8);
  a[2] = a[3] = 1.0;
  CHECK(std::abs(a.dot(c * a)) < 1e-12);
  a.setZero();
  a[6] = a[7] = 1.0;
  CHECK(std::abs(a.dot(c * a)) < 1e-12);
  for (Eigen::Index i = 0; i < 8; ++i) CHECK(c(i, i) >= 0.0);
}

TEST_CASE("covariance errors") {
  const NaturalParams truth = poisson_truth();
  const auto sim = simulate(truth, 100, 2);
  FitResult r = fitted(truth, sim.obs);
  REQUIRE(r.converged);
  FitResult bad = r;
  bad.hessian_working = -Eigen::MatrixXd::Identity(4, 4);
  CHECK_THROWS_AS(working_covariance(bad), CovarianceUnavailable);
  FitResult stalled = r;
  stalled.converged = false;
  stalled.status = optim::Status::MaxIterations;
  CHECK_THROWS_AS(wald_table(stalled), ArgumentError);
  CHECK_THROWS_AS(smoothing_with_uncertainty(stalled, sim.obs), ArgumentError);
}

TEST_CASE("smoothing standard errors match a finite-difference delta method") {
  const NaturalParams truth = poisson_truth();
  const auto sim = simulate(truth, 120, 5);
  const FitResult r = fitted(truth, sim.obs);
  REQUIRE(r.converged);
  const SmoothingReport rep = smoothing_with_uncertainty(r, sim.obs);
  const EmissionSpec spec = r.spec;
  const auto probs = [&](const Eigen::VectorXd& w) {
    const auto s = kernels::smoothing<double>({w.data(), static_cast<std::size_t>(w.size())}, sim.obs, spec);
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size())));
  };
  const Eigen::MatrixXd J = t::central_jacobian(probs, r.working_hat.values, 1e-5);
  const Eigen::MatrixXd cov = r.hessian_working.inverse();
  double worst = 0.0;
  for (Eigen::Index tt = 0; tt < 120; ++tt) {
    for (Eigen::Index i = 0; i < 2; ++i) {
      const Eigen::RowVectorXd row = J.row(tt * 2 + i);
      const double se = std::sqrt(std::max(0.0, (row * cov * row.transpose())(0, 0)));
      worst = std::max(worst, std::abs(se - rep.se(i, tt)));
    }
  }
  CHECK(worst < 1e-4);

  const Eigen::MatrixXd plain = smoothing_probabilities(r.natural_hat, sim.obs);
  CHECK((plain - rep.probs).cwiseAbs().maxCoeff() < 1e-12);
  for (Eigen::Index tt = 0; tt < 120; ++tt) {
    CHECK(std::abs(rep.probs.col(tt).sum() - 1.0) < 1e-10);
    for (Eigen::Index i = 0; i < 2; ++i) {
      CHECK(rep.ci_lower(i, tt) >= 0.0);
      CHECK(rep.ci_upper(i, tt) <= 1.0);
      CHECK(rep.ci_lower(i, tt) <= rep.probs(i, tt));
      CHECK(rep.probs(i, tt) <= rep.ci_upper(i, tt));
    }
  }
}

TEST_CASE("serial and parallel smoothing reports are identical") {
  const NaturalParams truth =
      NaturalParams::gaussian(t::tpm2(0.05, 0.15), Eigen::Vector2d(-5.0, 5.0), Eigen::Vector2d(1.0, 5.0));
  const auto sim = simulate(truth, 200, 21);
  const FitResult r = fitted(truth, sim.obs);
  REQUIRE(r.converged);
  const SmoothingReport a = smoothing_with_uncertainty(r, sim.obs, 0.95, false);
  const SmoothingReport b = smoothing_with_uncertainty(r, sim.obs, 0.95, true);
  CHECK(a.se == b.se);
  CHECK(a.probs == b.probs);
  CHECK(a.most_likely_state == b.most_likely_state);
}

TEST_CASE("single state smoothing is degenerate") {
  const ObservationSeries obs({1, 3, 2, 5});
  const auto init = NaturalParams::poisson(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Constant(1, 1.0));
  const FitResult r = fit(init.spec(), obs, init, optim::OptimizerConfig{});
  REQUIRE(r.converged);
  const SmoothingReport rep = smoothing_with_uncertainty(r, obs);
  CHECK(rep.probs.cwiseAbs().minCoeff() == 1.0);
  CHECK(rep.se.cwiseAbs().maxCoeff() == 0.0);
  for (int s : rep.most_likely_state) CHECK(s == 1);
}

TEST_CASE("most likely states recover a well separated path") {
  const NaturalParams truth =
      NaturalParams::gaussian(t::tpm2(0.05, 0.15), Eigen::Vector2d(-5.0, 5.0), Eigen::Vector2d(1.0, 5.0));
  const auto sim = simulate(truth, 500, 33);
  const FitResult r = fitted(truth, sim.obs);
  REQUIRE(r.converged);
  const SmoothingReport rep = smoothing_with_uncertainty(r, sim.obs);
  int hits = 0;
  for (std::size_t tt = 0; tt < sim.states.size(); ++tt) hits += rep.most_likely_state[tt] == sim.states[tt] + 1;
  CHECK(hits >= 0.95 * 500);
}

TEST_CASE("Wald interval coverage for lambda2") {
  const NaturalParams truth = poisson_truth();
  int covered = 0;
  int fits = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto sim = simulate(truth, 200, 1000 + seed);
    FitResult r = fitted(truth, sim.obs);
    if (!r.converged) continue;
    ++fits;
    const auto rows = wald_table(r);
    covered += rows[1].lower <= 7.0 && 7.0 <= rows[1].upper;
  }
  CHECK(fits >= 95);
  CHECK(covered >= 90);
}

TEST_CASE("percentile and information criteria") {
  const std::vector<double> v{1, 2, 3, 4};
  CHECK(percentile(v, 0.5) == 2.5);
  CHECK(percentile(v, 0.25) == 1.75);
  CHECK(percentile(v, 0.0) == 1.0);
  CHECK(percentile(v, 1.0) == 4.0);
  CHECK_THROWS_AS(percentile({}, 0.5), ArgumentError);
  const auto ic = aic_bic(10.0, 3, 100);
  CHECK(ic.aic == 26.0);
  CHECK(ic.bic == doctest::Approx(20.0 + 3.0 * std::log(100.0)));
}

TEST_CASE("parametric bootstrap") {
  const NaturalParams truth = poisson_truth();
  const auto sim = simulate(truth, 200, 44);
  const FitResult r = fitted(truth, sim.obs);
  REQUIRE(r.converged);
  BootstrapOptions opt;
  opt.B = 40;
  opt.seed = 9;
  opt.parallel = true;
  const BootstrapResult a = parametric_bootstrap(r, opt);
  opt.parallel = false;
  const BootstrapResult b = parametric_bootstrap(r, opt);
  CHECK(a.estimates == b.estimates);
  CHECK(a.requested == 40);
  CHECK(a.failures + a.estimates.rows() == 40);
  CHECK(a.names == r.natural_hat.names());
  const Eigen::VectorXd est = r.natural_hat.flatten();
  for (Eigen::Index k = 0; k < est.size(); ++k) {
    CHECK(a.lower[k] <= a.median[k]);
    CHECK(a.median[k] <= a.upper[k]);
  }
  CHECK(std::abs(a.median[1] - est[1]) < 0.5);
  opt.B = 1;
  CHECK_THROWS_AS(parametric_bootstrap(r, opt), ArgumentError);
}
