#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "hmmkit/fit.hpp"
#include "hmmkit/inference.hpp"
#include "hmmkit/io.hpp"
#include "hmmkit/simulate.hpp"
#include "hmmkit/studies.hpp"

#ifndef HMMKIT_VERSION
#define HMMKIT_VERSION "dev"
#endif

namespace hmmkit::cli {

using io::json;

namespace {

optim::OptimizerConfig to_config(const OptimizerFlags& f) {
  optim::OptimizerConfig c;
  c.algorithm = optim::algorithm_from_string(f.opt);
  const bool nm = c.algorithm == optim::Algorithm::NelderMead;
  const bool newton = c.algorithm == optim::Algorithm::NewtonType;
  if (f.grad != "supplied" && f.grad != "fd") throw InputError("--grad: expected 'supplied' or 'fd'");
  if (f.hess != "supplied" && f.hess != "none" && f.hess != "auto") {
    throw InputError("--hess: expected 'supplied', 'none' or 'auto'");
  }
  c.use_supplied_gradient = !nm && f.grad == "supplied";
  c.use_supplied_hessian = newton && (f.hess == "supplied" || (f.hess == "auto" && c.use_supplied_gradient));
  if (f.hess == "supplied" && !newton) throw InputError("--hess supplied requires --opt newton");
  c.max_iterations = f.max_iter;
  c.validate();
  return c;
}

json optimizer_flags_json(const OptimizerFlags& f) {
  return io::to_json(to_config(f));
}

/// Accepts a bare model or a fit result carrying one under "model".
NaturalParams load_model(const std::string& path, bool* converged = nullptr) {
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
  if (converged) *converged = true;
  if (j.is_object() && j.contains("model")) {
    if (converged) *converged = j.value("converged", false);
    return io::natural_from_json(j.at("model"));
  }
  return io::natural_from_json(j);
}

EmissionSpec make_spec(const std::string& family, int states) {
  try {
    return EmissionSpec(family_from_string(family), states);
  } catch (const Error& e) {
    throw InputError(std::string("--family/--states: ") + e.what());
  }
}

void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw InputError("--level: must lie strictly between 0 and 1");
}

struct Manifest {
  io::RunManifest m;

  Manifest(std::uint64_t seed, const json& semantic, const std::vector<std::string>& inputs) {
    m.version = HMMKIT_VERSION;
    m.seed = seed;
    m.config_hash = io::sha256_hex(semantic.dump());
    std::string digests;
    for (const auto& p : inputs) digests += io::file_sha256(p);
    m.input_digest = inputs.size() == 1 ? digests : io::sha256_hex(digests);
    m.started_at = io::utc_timestamp();
  }

  void write(const std::string& path, const std::string& text) {
    m.finished_at = io::utc_timestamp();
    io::write_with_manifest(path, text, m);
  }
};

std::string nan_safe_table(const NaturalParams& n) {
  std::vector<ParameterEstimate> rows;
  const Eigen::VectorXd est = n.flatten();
  const auto names = n.names();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (Eigen::Index k = 0; k < est.size(); ++k) rows.push_back({names[static_cast<std::size_t>(k)], est[k], nan, nan, nan});
  return io::parameter_table_csv(rows);
}

FitResult run_fit(const FitOptions& o, const ObservationSeries& obs, const EmissionSpec& spec) {
  obs.validate(spec.family);
  NaturalParams init = o.init.empty() ? default_init(obs, spec) : load_model(o.init);
  if (init.spec().family != spec.family || init.spec().m != spec.m) {
    throw InputError("--init: model has family " + to_string(init.family) + " and " + std::to_string(init.states()) +
                     " states, expected " + to_string(spec.family) + " with " + std::to_string(spec.m));
  }
  return hmmkit::fit(spec, obs, init, to_config(o.optimizer));
}

json fit_semantics(const FitOptions& o) {
  return {{"command", "fit"},      {"family", o.family}, {"states", o.states}, {"header", o.header},
          {"init", o.init},        {"level", o.level},   {"optimizer", optimizer_flags_json(o.optimizer)}};
}

}  // namespace

int cmd_fit(const FitOptions& o) {
  check_level(o.level);
  const EmissionSpec spec = make_spec(o.family, o.states);
  const ObservationSeries obs = io::read_series_csv(o.data, o.header);
  std::vector<std::string> inputs{o.data};
  if (!o.init.empty()) inputs.push_back(o.init);
  Manifest manifest(0, fit_semantics(o), inputs);

  FitResult r = run_fit(o, obs, spec);
  std::string table;
  int code = Success;
  if (r.converged) {
    try {
      table = io::parameter_table_csv(wald_table(r, o.level));
    } catch (const CovarianceUnavailable& e) {
      std::cerr << "numerical failure: " << e.what() << '\n';
      code = NumericalFailure;
    }
  } else {
    std::cerr << "optimizer stopped with status " << optim::to_string(r.status) << '\n';
    code = NumericalFailure;
  }
  if (table.empty()) table = r.natural_hat.gamma.size() > 0 ? nan_safe_table(r.natural_hat) : "param,estimate,lower,upper\n";
  json j = io::to_json(r);
  j["level"] = o.level;
  manifest.write(o.out + ".json", j.dump(2) + "\n");
  manifest.write(o.out + ".csv", table);
  std::cout << table;
  return code;
}

int cmd_simulate(const SimulateOptions& o) {
  if (o.T < 1) throw InputError("--T: must be at least 1");
  const NaturalParams n = load_model(o.model);
  Manifest manifest(o.seed, {{"command", "simulate"}, {"T", o.T}, {"model", io::to_json(n)}}, {o.model});
  const SimulatedSeries sim = simulate(n, o.T, o.seed);
  std::ostringstream series;
  for (double x : sim.obs.values) series << io::format_double(x) << '\n';
  std::ostringstream states;
  for (int c : sim.states) states << c + 1 << '\n';
  manifest.write(o.out, series.str());
  manifest.write(o.out + ".states", states.str());
  return Success;
}

int cmd_smooth(const SmoothOptions& o) {
  check_level(o.level);
  bool converged = true;
  const NaturalParams n = load_model(o.model, &converged);
  if (!o.family.empty() && family_from_string(o.family) != n.family) {
    throw InputError("--family: data declared " + o.family + " but the model is " + to_string(n.family));
  }
  const ObservationSeries obs = io::read_series_csv(o.data, o.header);
  try {
    obs.validate(n.family);
  } catch (const DomainError& e) {
    throw InputError(std::string("data do not fit a ") + to_string(n.family) + " model: " + e.what());
  }
  if (!converged) throw InputError(o.model + ": fit did not converge; smoothing needs a fitted model");
  Manifest manifest(0, {{"command", "smooth"}, {"level", o.level}, {"header", o.header}}, {o.data, o.model});

  const EmissionSpec spec = n.spec();
  optim::OptimOutcome at_model;
  at_model.x_final = working_from_natural(n, spec).values;
  at_model.f_final = nll(WorkingParams(at_model.x_final), obs, spec);
  at_model.status = optim::Status::Converged;
  const FitResult fitted = finalize_fit(spec, obs, at_model, "supplied");
  const SmoothingReport rep = smoothing_with_uncertainty(fitted, obs, o.level, false);

  for (Eigen::Index t = 0; t < rep.probs.cols(); ++t) {
    if (std::abs(rep.probs.col(t).sum() - 1.0) > 1e-10) {
      throw NumericalError("smoothing probabilities at t=" + std::to_string(t + 1) + " do not sum to one");
    }
  }
  manifest.write(o.out + ".csv", io::smoothing_csv(rep));
  manifest.write(o.out + ".json", io::to_json(rep).dump(2) + "\n");
  if (!o.plot_data.empty()) {
    for (Eigen::Index i = 0; i < rep.probs.rows(); ++i) {
      std::ostringstream s;
      s << "t,x,prob,lower,upper\n";
      for (Eigen::Index t = 0; t < rep.probs.cols(); ++t) {
        s << t + 1 << ',' << io::format_double(obs[static_cast<std::size_t>(t)]) << ','
          << io::format_double(rep.probs(i, t)) << ',' << io::format_double(rep.ci_lower(i, t)) << ','
          << io::format_double(rep.ci_upper(i, t)) << '\n';
      }
      manifest.write(o.plot_data + "_state" + std::to_string(i + 1) + ".csv", s.str());
    }
  }
  return Success;
}

int cmd_bootstrap(const BootstrapOptionsCli& o) {
  check_level(o.fit.level);
  if (o.B < 2) throw InputError("--B: must be at least 2");
  const EmissionSpec spec = make_spec(o.fit.family, o.fit.states);
  const ObservationSeries obs = io::read_series_csv(o.fit.data, o.fit.header);
  json sem = fit_semantics(o.fit);
  sem["command"] = "bootstrap";
  sem["B"] = o.B;
  std::vector<std::string> inputs{o.fit.data};
  if (!o.fit.init.empty()) inputs.push_back(o.fit.init);
  Manifest manifest(o.seed, sem, inputs);

  const FitResult r = run_fit(o.fit, obs, spec);
  if (!r.converged) {
    std::cerr << "initial fit stopped with status " << optim::to_string(r.status) << '\n';
    return NumericalFailure;
  }
  BootstrapOptions bo;
  bo.B = o.B;
  bo.seed = o.seed;
  bo.level = o.fit.level;
  const BootstrapResult b = parametric_bootstrap(r, bo);
  std::ostringstream table;
  table << "param,median,lower,upper\n";
  for (std::size_t k = 0; k < b.names.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    table << b.names[k] << ',' << io::format_double(b.median[i]) << ',' << io::format_double(b.lower[i]) << ','
          << io::format_double(b.upper[i]) << '\n';
  }
  json j = io::to_json(b);
  j["fit"] = io::to_json(r);
  j["level"] = o.fit.level;
  manifest.write(o.fit.out + ".json", j.dump(2) + "\n");
  manifest.write(o.fit.out + ".csv", table.str());
  std::cout << table.str();
  return Success;
}

namespace {

std::string quantile_cells(const studies::Quantiles& q) {
  return io::format_double(q.q025) + ',' + io::format_double(q.median) + ',' + io::format_double(q.q975);
}

}  // namespace

int cmd_study(const StudyOptions& o) {
  json raw;
  try {
    raw = json::parse(io::read_text(o.config));
  } catch (const json::parse_error& e) {
    throw InputError(o.config + ": " + e.what());
  }
  const studies::StudyConfig cfg = io::study_config_from_json(raw);
  json sem = io::to_json(cfg);
  sem.erase("parallel");
  sem.erase("single_worker_timing");
  Manifest manifest(cfg.seed, sem, {o.config});
  const auto names = cfg.truth.names();
  const bool plots = !o.plot_data.empty();

  json summary;
  std::string records;
  std::ostringstream plot;
  switch (cfg.design) {
    case studies::Design::Speed: {
      const auto r = studies::run_speed_study(cfg);
      summary = io::to_json(r);
      records = io::records_csv(r.records, names);
      plot << "optimizer,metric,q025,median,q975\n";
      for (const auto& s : r.summaries) {
        plot << s.optimizer_id << ",duration_ms," << quantile_cells(s.duration_ms) << '\n';
        plot << s.optimizer_id << ",iterations," << quantile_cells(s.iterations) << '\n';
      }
      break;
    }
    case studies::Design::Accuracy: {
      const auto r = studies::run_accuracy_study(cfg);
      summary = io::to_json(r);
      records = io::records_csv(r.records, names);
      const Eigen::VectorXd truth = cfg.truth.flatten();
      plot << "optimizer,param,truth,q025,median,q975\n";
      for (const auto& s : r.summaries) {
        for (std::size_t k = 0; k < s.parameters.size(); ++k) {
          plot << s.optimizer_id << ',' << s.parameters[k].name << ','
               << io::format_double(truth[static_cast<Eigen::Index>(k)]) << ',' << quantile_cells(s.parameters[k].q)
               << '\n';
        }
      }
      break;
    }
    case studies::Design::Robustness: {
      const auto r = studies::run_robustness_study(cfg);
      summary = io::to_json(r);
      records = io::records_csv(r.records, names);
      plot << "optimizer,failure_pct,global_pct\n";
      for (const auto& s : r.summaries) {
        plot << s.optimizer_id << ',' << io::format_double(s.failure_pct) << ',' << io::format_double(s.global_pct)
             << '\n';
      }
      break;
    }
    case studies::Design::Hybrid: {
      const auto r = studies::run_hybrid_study(cfg);
      summary = io::to_json(r);
      std::vector<studies::StudyRecord> all = r.hybrid_records;
      all.insert(all.end(), r.direct_records.begin(), r.direct_records.end());
      records = io::records_csv(all, names);
      plot << "budget,hybrid_converged,direct_converged\n";
      for (const auto& row : r.rows) plot << row.budget << ',' << row.hybrid_converged << ',' << row.direct_converged << '\n';
      plot << "failed," << r.hybrid_failures << ',' << r.both_failed << '\n';
      break;
    }
  }
  summary["config"] = io::to_json(cfg);
  manifest.write(o.out + "_records.csv", records);
  manifest.write(o.out + "_summary.json", summary.dump(2) + "\n");
  if (plots) manifest.write(o.plot_data + "_" + studies::to_string(cfg.design) + ".csv", plot.str());
  return Success;
}

int cmd_select(const SelectOptions& o) {
  if (o.m_min < 1 || o.m_min > o.m_max || o.m_max > 8) throw InputError("--m-min/--m-max: need 1 <= m_min <= m_max <= 8");
  const Family family = make_spec(o.family, 1).family;
  const ObservationSeries obs = io::read_series_csv(o.data, o.header);
  obs.validate(family);
  const optim::OptimizerConfig config = to_config(o.optimizer);
  Manifest manifest(0,
                    {{"command", "select"}, {"family", o.family}, {"m_min", o.m_min}, {"m_max", o.m_max},
                     {"header", o.header}, {"optimizer", io::to_json(config)}},
                    {o.data});

  const Selection sel = select_states(obs, family, o.m_min, o.m_max, config);
  std::ostringstream table;
  json j = json::array();
  table << "m,k,nll,aic,bic,converged,best_aic,best_bic\n";
  for (std::size_t i = 0; i < sel.rows.size(); ++i) {
    const SelectionRow& r = sel.rows[i];
    const bool ba = static_cast<int>(i) == sel.best_aic, bb = static_cast<int>(i) == sel.best_bic;
    table << r.m << ',' << r.k << ',' << io::format_double(r.nll) << ',' << io::format_double(r.ic.aic) << ','
          << io::format_double(r.ic.bic) << ',' << (r.converged ? "true" : "false") << ',' << (ba ? "*" : "") << ','
          << (bb ? "*" : "") << '\n';
    j.push_back({{"m", r.m}, {"k", r.k}, {"converged", r.converged}, {"best_aic", ba}, {"best_bic", bb},
                 {"nll", r.converged ? json(r.nll) : json(nullptr)},
                 {"aic", r.converged ? json(r.ic.aic) : json(nullptr)},
                 {"bic", r.converged ? json(r.ic.bic) : json(nullptr)}});
  }
  manifest.write(o.out + ".csv", table.str());
  manifest.write(o.out + ".json", json{{"family", o.family}, {"rows", j}}.dump(2) + "\n");
  std::cout << table.str();
  return sel.best_bic < 0 ? NumericalFailure : Success;
}

}  // namespace hmmkit::cli
