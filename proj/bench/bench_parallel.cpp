// Serial reference paths against their OpenMP counterparts.
// On a single core the parallel variants only measure scheduling overhead.

#include <benchmark/benchmark.h>

#include <map>

#include "hmmkit/fit.hpp"
#include "hmmkit/inference.hpp"
#include "hmmkit/simulate.hpp"
#include "hmmkit/studies.hpp"

using namespace hmmkit;

namespace {

NaturalParams poisson_truth() {
  Eigen::MatrixXd g(2, 2);
  g << 0.95, 0.05, 0.15, 0.85;
  return NaturalParams::poisson(g, Eigen::Vector2d(1.0, 7.0));
}

const FitResult& fitted(std::size_t T) {
  static std::map<std::size_t, FitResult> cache;
  auto it = cache.find(T);
  if (it == cache.end()) {
    const NaturalParams truth = poisson_truth();
    const auto sim = simulate(truth, T, 3);
    it = cache.emplace(T, fit(truth.spec(), sim.obs, truth, optim::OptimizerConfig{})).first;
  }
  return it->second;
}

ObservationSeries series(std::size_t T) { return simulate(poisson_truth(), T, 3).obs; }

void BM_SmoothingSE(benchmark::State& state) {
  const auto T = static_cast<std::size_t>(state.range(0));
  const bool parallel = state.range(1) != 0;
  const FitResult& f = fitted(T);
  const ObservationSeries obs = series(T);
  for (auto _ : state) benchmark::DoNotOptimize(smoothing_with_uncertainty(f, obs, 0.95, parallel));
  state.SetLabel(parallel ? "openmp" : "serial");
}
BENCHMARK(BM_SmoothingSE)->ArgsProduct({{200, 1000}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_Bootstrap(benchmark::State& state) {
  const FitResult& f = fitted(200);
  BootstrapOptions opt;
  opt.B = 50;
  opt.parallel = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(parametric_bootstrap(f, opt));
  state.SetLabel(opt.parallel ? "openmp" : "serial");
}
BENCHMARK(BM_Bootstrap)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_RobustnessStudy(benchmark::State& state) {
  studies::StudyConfig cfg;
  cfg.design = studies::Design::Robustness;
  cfg.truth = poisson_truth();
  cfg.grid_size = 100;
  cfg.optimizers = {optim::OptimizerConfig::from_id("newton_grhe"), optim::OptimizerConfig::from_id("bfgs_gr")};
  cfg.parallel = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(studies::run_robustness_study(cfg));
  state.SetLabel(cfg.parallel ? "openmp" : "serial");
}
BENCHMARK(BM_RobustnessStudy)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
