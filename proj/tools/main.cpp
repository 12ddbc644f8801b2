#include <CLI11.hpp>

#include "commands.hpp"

namespace {

using namespace hmmkit::cli;

void add_optimizer_flags(CLI::App* cmd, OptimizerFlags& f) {
  cmd->add_option("--opt", f.opt, "nelder_mead, bfgs, cg or newton")->capture_default_str();
  cmd->add_option("--grad", f.grad, "gradient source: supplied or fd")->capture_default_str();
  cmd->add_option("--hess", f.hess, "Hessian source for newton: supplied, none or auto")->capture_default_str();
  cmd->add_option("--max-iter", f.max_iter, "iteration cap")->capture_default_str()->check(CLI::PositiveNumber);
}

void add_fit_flags(CLI::App* cmd, FitOptions& o) {
  cmd->add_option("data", o.data, "single-column CSV of observations")->required();
  cmd->add_flag("--header", o.header, "skip the first non-empty line");
  cmd->add_option("--family", o.family, "poisson or gaussian")->capture_default_str();
  cmd->add_option("-m,--states", o.states, "number of hidden states")->capture_default_str();
  cmd->add_option("--init", o.init, "starting model as JSON");
  cmd->add_option("--level", o.level, "confidence level")->capture_default_str();
  cmd->add_option("-o,--out", o.out, "output path prefix")->capture_default_str();
  add_optimizer_flags(cmd, o.optimizer);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hidden Markov models by direct likelihood maximization"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", HMMKIT_VERSION);

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "fit a model and report Wald confidence intervals");
  add_fit_flags(fit_cmd, fit);

  SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "draw a series from a model");
  sim_cmd->add_option("model", sim.model, "model JSON")->required();
  sim_cmd->add_option("-T,--length", sim.T, "series length")->capture_default_str();
  sim_cmd->add_option("--seed", sim.seed, "random seed")->capture_default_str();
  sim_cmd->add_option("-o,--out", sim.out, "output CSV")->capture_default_str();

  SmoothOptions smooth;
  auto* smooth_cmd = app.add_subcommand("smooth", "smoothing probabilities with delta-method intervals");
  smooth_cmd->add_option("data", smooth.data, "single-column CSV of observations")->required();
  smooth_cmd->add_option("--model", smooth.model, "fitted model JSON")->required();
  smooth_cmd->add_flag("--header", smooth.header, "skip the first non-empty line");
  smooth_cmd->add_option("--family", smooth.family, "expected family of the model");
  smooth_cmd->add_option("--level", smooth.level, "confidence level")->capture_default_str();
  smooth_cmd->add_option("-o,--out", smooth.out, "output path prefix")->capture_default_str();
  smooth_cmd->add_option("--plot-data", smooth.plot_data, "prefix for per-state plot CSVs");

  BootstrapOptionsCli boot;
  auto* boot_cmd = app.add_subcommand("bootstrap", "parametric bootstrap percentile intervals");
  add_fit_flags(boot_cmd, boot.fit);
  boot_cmd->add_option("-B,--replicates", boot.B, "bootstrap replicates")->capture_default_str();
  boot_cmd->add_option("--seed", boot.seed, "random seed")->capture_default_str();

  StudyOptions study;
  auto* study_cmd = app.add_subcommand("study", "run a simulation study from a JSON config");
  study_cmd->add_option("config", study.config, "study config JSON")->required();
  study_cmd->add_option("-o,--out", study.out, "output path prefix")->capture_default_str();
  study_cmd->add_option("--emit-plot-data,--plot-data", study.plot_data, "prefix for figure CSVs");

  SelectOptions sel;
  auto* sel_cmd = app.add_subcommand("select", "AIC/BIC over a range of state counts");
  sel_cmd->add_option("data", sel.data, "single-column CSV of observations")->required();
  sel_cmd->add_flag("--header", sel.header, "skip the first non-empty line");
  sel_cmd->add_option("--family", sel.family, "poisson or gaussian")->capture_default_str();
  sel_cmd->add_option("--m-min", sel.m_min, "smallest state count")->capture_default_str();
  sel_cmd->add_option("--m-max", sel.m_max, "largest state count")->capture_default_str();
  sel_cmd->add_option("-o,--out", sel.out, "output path prefix")->capture_default_str();
  add_optimizer_flags(sel_cmd, sel.optimizer);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? Success : InputFailure;
  }

  if (*fit_cmd) return guarded([&] { return cmd_fit(fit); });
  if (*sim_cmd) return guarded([&] { return cmd_simulate(sim); });
  if (*smooth_cmd) return guarded([&] { return cmd_smooth(smooth); });
  if (*boot_cmd) return guarded([&] { return cmd_bootstrap(boot); });
  if (*study_cmd) return guarded([&] { return cmd_study(study); });
  return guarded([&] { return cmd_select(sel); });
}
