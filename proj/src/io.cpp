#include "hmmkit/io.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace hmmkit::io {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(trim(cur));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vector_from(const json& j, const std::string& field) {
  if (!j.is_array()) throw InputError(field + ": expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InputError(field + "[" + std::to_string(i) + "]: expected a number");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

template <class T>
T field_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError(std::string(key) + ": wrong type");
  }
}

json quantiles_json(const studies::Quantiles& q) { return {{"q025", q.q025}, {"median", q.median}, {"q975", q.q975}}; }

}  // namespace

// ---------------------------------------------------------------------------
// Series

ObservationSeries parse_series_csv(const std::string& text, bool header, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::vector<double> values;
  int lineno = 0;
  bool skipped_header = !header;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string cell = trim(line);
    if (cell.empty()) continue;
    if (!skipped_header) {
      skipped_header = true;
      continue;
    }
    if (cell.find(',') != std::string::npos) {
      throw InputError(source + ":" + std::to_string(lineno) + ": expected a single column, got '" + cell + "'");
    }
    double x = 0.0;
    if (!parse_number(cell, x)) {
      throw InputError(source + ":" + std::to_string(lineno) + ": cannot parse '" + cell + "' as a number");
    }
    if (!std::isfinite(x)) throw InputError(source + ":" + std::to_string(lineno) + ": value is not finite");
    values.push_back(x);
  }
  if (values.empty()) throw InputError(source + ": no observations");
  return ObservationSeries(std::move(values));
}

ObservationSeries read_series_csv(const std::filesystem::path& path, bool header) {
  return parse_series_csv(read_text(path), header, path.string());
}

void write_series_csv(const std::filesystem::path& path, const ObservationSeries& obs, const std::vector<int>* states) {
  std::ostringstream out;
  for (std::size_t t = 0; t < obs.size(); ++t) out << format_double(obs[t]) << '\n';
  write_text(path, out.str());
  if (states) {
    std::ostringstream s;
    for (int c : *states) s << c + 1 << '\n';
    write_text(path.string() + ".states", s.str());
  }
}

// ---------------------------------------------------------------------------
// Parameters and configs

json to_json(const NaturalParams& n) {
  json j;
  j["family"] = to_string(n.family);
  j["m"] = n.states();
  json g = json::array();
  for (Eigen::Index i = 0; i < n.gamma.rows(); ++i)
    for (Eigen::Index k = 0; k < n.gamma.cols(); ++k) g.push_back(n.gamma(i, k));
  j["gamma"] = g;
  if (n.family == Family::Poisson) {
    j["lambda"] = vector_json(n.lambda);
  } else {
    j["mu"] = vector_json(n.mu);
    j["sigma"] = vector_json(n.sigma);
  }
  j["delta"] = vector_json(n.delta);
  return j;
}

NaturalParams natural_from_json(const json& j) {
  if (!j.is_object()) throw InputError("model: expected a JSON object");
  if (!j.contains("family")) throw InputError("family: missing");
  Family family;
  try {
    family = family_from_string(j.at("family").get<std::string>());
  } catch (const std::exception& e) {
    throw InputError(std::string("family: ") + e.what());
  }
  if (!j.contains("gamma")) throw InputError("gamma: missing");
  const json& gj = j.at("gamma");
  Eigen::VectorXd flat;
  if (gj.is_array() && !gj.empty() && gj[0].is_array()) {
    std::vector<double> v;
    for (std::size_t r = 0; r < gj.size(); ++r) {
      const Eigen::VectorXd row = vector_from(gj[r], "gamma[" + std::to_string(r) + "]");
      if (row.size() != static_cast<Eigen::Index>(gj.size())) throw InputError("gamma: nested rows must form a square matrix");
      v.insert(v.end(), row.data(), row.data() + row.size());
    }
    flat = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  } else {
    flat = vector_from(gj, "gamma");
  }
  const auto m = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(flat.size()))));
  if (m < 1 || m * m != flat.size()) throw InputError("gamma: length " + std::to_string(flat.size()) + " is not a square");
  if (j.contains("m") && j.at("m").get<Eigen::Index>() != m) {
    throw InputError("m: " + j.at("m").dump() + " does not match gamma (" + std::to_string(m) + " states)");
  }
  Eigen::MatrixXd gamma(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index k = 0; k < m; ++k) gamma(i, k) = flat[i * m + k];

  auto emission = [&](const char* key) {
    if (!j.contains(key)) throw InputError(std::string(key) + ": missing");
    Eigen::VectorXd v = vector_from(j.at(key), key);
    if (v.size() != m) throw InputError(std::string(key) + ": expected " + std::to_string(m) + " entries");
    return v;
  };
  NaturalParams n;
  try {
    n = family == Family::Poisson ? NaturalParams::poisson(gamma, emission("lambda"))
                                  : NaturalParams::gaussian(gamma, emission("mu"), emission("sigma"));
  } catch (const InputError&) {
    throw;
  } catch (const Error& e) {
    throw InputError(std::string("model: ") + e.what());
  }
  if (j.contains("delta")) {
    const Eigen::VectorXd d = vector_from(j.at("delta"), "delta");
    if (d.size() != m || (d - n.delta).cwiseAbs().maxCoeff() > 1e-8) {
      throw InputError("delta: does not match the stationary distribution of gamma");
    }
  }
  return n;
}

json to_json(const optim::OptimizerConfig& c) {
  return {{"id", c.id()},
          {"algorithm", optim::to_string(c.algorithm)},
          {"gradient", c.use_supplied_gradient ? "supplied" : "finite_difference"},
          {"hessian", c.use_supplied_hessian ? "supplied" : "none"},
          {"max_iterations", c.max_iterations},
          {"tolerances", {{"gradient", c.tol.gradient}, {"relative_f", c.tol.relative_f}, {"step", c.tol.step}}}};
}

optim::OptimizerConfig optimizer_from_json(const json& j) {
  optim::OptimizerConfig c;
  try {
    if (j.is_string()) {
      c = optim::OptimizerConfig::from_id(j.get<std::string>());
    } else if (j.is_object()) {
      if (j.contains("id")) {
        c = optim::OptimizerConfig::from_id(j.at("id").get<std::string>());
      } else {
        c.algorithm = optim::algorithm_from_string(field_or<std::string>(j, "algorithm", "newton"));
        c.use_supplied_gradient = c.algorithm != optim::Algorithm::NelderMead;
        c.use_supplied_hessian = c.algorithm == optim::Algorithm::NewtonType;
      }
      if (j.contains("gradient")) c.use_supplied_gradient = j.at("gradient").get<std::string>() == "supplied";
      if (j.contains("hessian")) c.use_supplied_hessian = j.at("hessian").get<std::string>() == "supplied";
      c.max_iterations = field_or<int>(j, "max_iterations", c.max_iterations);
      if (j.contains("tolerances")) {
        const json& t = j.at("tolerances");
        c.tol.gradient = field_or<double>(t, "gradient", c.tol.gradient);
        c.tol.relative_f = field_or<double>(t, "relative_f", c.tol.relative_f);
        c.tol.step = field_or<double>(t, "step", c.tol.step);
      }
    } else {
      throw InputError("expected an optimizer id or object");
    }
    c.validate();
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Results

json to_json(const FitResult& r) {
  json j;
  j["family"] = to_string(r.spec.family);
  j["m"] = r.spec.m;
  j["T"] = r.T;
  j["optimizer"] = r.optimizer_id;
  j["status"] = optim::to_string(r.status);
  j["converged"] = r.converged;
  j["nll"] = r.nll;
  j["iterations"] = r.iterations;
  j["function_evals"] = r.function_evals;
  j["gradient_evals"] = r.gradient_evals;
  j["hessian_evals"] = r.hessian_evals;
  j["working"] = vector_json(r.working_hat.values);
  if (r.natural_hat.gamma.size() > 0) {
    j["model"] = to_json(r.natural_hat);
    j["parameters"] = r.natural_hat.names();
  }
  j["hessian_working"] = matrix_json(r.hessian_working);
  j["cov_natural"] = r.cov_natural ? matrix_json(*r.cov_natural) : json(nullptr);
  if (std::isfinite(r.nll) && r.T > 0) {
    const auto ic = aic_bic(r.nll, r.spec.free_parameters(), r.T);
    j["aic"] = ic.aic;
    j["bic"] = ic.bic;
  }
  return j;
}

json to_json(const SmoothingReport& r) {
  return {{"level", r.level},
          {"probs", matrix_json(r.probs)},
          {"se", matrix_json(r.se)},
          {"ci_lower", matrix_json(r.ci_lower)},
          {"ci_upper", matrix_json(r.ci_upper)},
          {"most_likely_state", r.most_likely_state}};
}

json to_json(const BootstrapResult& r) {
  json rows = json::array();
  for (std::size_t k = 0; k < r.names.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    rows.push_back({{"param", r.names[k]}, {"median", r.median[i]}, {"lower", r.lower[i]}, {"upper", r.upper[i]}});
  }
  return {{"requested", r.requested}, {"failures", r.failures}, {"parameters", rows}};
}

json to_json(const studies::StudyConfig& c) {
  json opts = json::array();
  for (const auto& o : c.optimizers) opts.push_back(to_json(o));
  return {{"design", studies::to_string(c.design)},
          {"truth", to_json(c.truth)},
          {"T", c.T},
          {"replications", c.replications},
          {"optimizers", opts},
          {"seed", c.seed},
          {"nll_margin", c.nll_margin},
          {"grid_size", c.grid_size},
          {"max_nm_budget", c.max_nm_budget},
          {"parallel", c.parallel},
          {"single_worker_timing", c.single_worker_timing}};
}

studies::StudyConfig study_config_from_json(const json& j) {
  if (!j.is_object()) throw InputError("study config: expected a JSON object");
  studies::StudyConfig c;
  try {
    c.design = studies::design_from_string(field_or<std::string>(j, "design", ""));
  } catch (const ArgumentError& e) {
    throw InputError(e.what());
  }
  if (!j.contains("truth")) throw InputError("truth: missing");
  try {
    c.truth = natural_from_json(j.at("truth"));
  } catch (const InputError& e) {
    throw InputError(std::string("truth.") + e.what());
  }
  const auto T = field_or<long long>(j, "T", 200);
  if (T < 1) throw InputError("T: must be at least 1");
  c.T = static_cast<std::size_t>(T);
  c.replications = field_or<int>(j, "replications", c.replications);
  c.seed = field_or<std::uint64_t>(j, "seed", c.seed);
  c.nll_margin = field_or<double>(j, "nll_margin", c.nll_margin);
  c.grid_size = field_or<std::size_t>(j, "grid_size", c.grid_size);
  c.max_nm_budget = field_or<int>(j, "max_nm_budget", c.max_nm_budget);
  c.parallel = field_or<bool>(j, "parallel", c.parallel);
  c.single_worker_timing = field_or<bool>(j, "single_worker_timing", c.single_worker_timing);
  if (j.contains("optimizers")) {
    const json& list = j.at("optimizers");
    if (!list.is_array()) throw InputError("optimizers: expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      try {
        c.optimizers.push_back(optimizer_from_json(list[i]));
      } catch (const InputError& e) {
        throw InputError("optimizers[" + std::to_string(i) + "]: " + e.what());
      }
    }
  }
  try {
    c.validate();
  } catch (const Error& e) {
    throw InputError(e.what());
  }
  return c;
}

namespace {

json records_json(const std::vector<studies::StudyRecord>& recs) {
  json a = json::array();
  for (const auto& r : recs) {
    json o = {{"replication", r.replication},
              {"optimizer", r.optimizer_id},
              {"duration_ns", r.duration_ns},
              {"iterations", r.iterations},
              {"status", optim::to_string(r.status)},
              {"nll", r.nll}};
    if (r.found_global) o["found_global"] = *r.found_global;
    a.push_back(o);
  }
  return a;
}

}  // namespace

json to_json(const studies::SpeedStudyResult& r) {
  json s = json::array();
  for (const auto& o : r.summaries) {
    s.push_back({{"optimizer", o.optimizer_id},
                 {"count", o.count},
                 {"duration_ms", quantiles_json(o.duration_ms)},
                 {"iterations", quantiles_json(o.iterations)}});
  }
  return {{"design", "speed"}, {"kept", r.kept.size()}, {"discarded", r.discarded}, {"summaries", s}};
}

json to_json(const studies::AccuracyStudyResult& r) {
  json s = json::array();
  for (const auto& o : r.summaries) {
    json params = json::array();
    for (const auto& p : o.parameters) params.push_back({{"param", p.name}, {"quantiles", quantiles_json(p.q)}});
    s.push_back({{"optimizer", o.optimizer_id},
                 {"converged", o.converged},
                 {"nll", quantiles_json(o.nll)},
                 {"parameters", params}});
  }
  return {{"design", "accuracy"}, {"summaries", s}};
}

json to_json(const studies::RobustnessStudyResult& r) {
  json s = json::array();
  for (const auto& o : r.summaries) {
    s.push_back({{"optimizer", o.optimizer_id},
                 {"inits", o.inits},
                 {"failures", o.failures},
                 {"converged", o.converged},
                 {"global", o.global},
                 {"failure_pct", o.failure_pct},
                 {"global_pct", o.global_pct}});
  }
  return {{"design", "robustness"},
          {"true_nll", r.true_nll},
          {"full_grid_size", r.full_grid_size},
          {"truth_runs", records_json(r.truth_records)},
          {"summaries", s}};
}

json to_json(const studies::HybridStudyResult& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"budget", row.budget},
                    {"hybrid_converged", row.hybrid_converged},
                    {"direct_converged", row.direct_converged}});
  }
  return {{"design", "hybrid"},
          {"inits", r.inits},
          {"hybrid_failures", r.hybrid_failures},
          {"direct_failures", r.direct_failures},
          {"both_failed", r.both_failed},
          {"hybrid_failure_pct", r.hybrid_failure_pct()},
          {"direct_failure_pct", r.direct_failure_pct()},
          {"escalation", rows}};
}

// ---------------------------------------------------------------------------
// CSV tables

std::string parameter_table_csv(const std::vector<ParameterEstimate>& rows) {
  std::ostringstream out;
  out << "param,estimate,lower,upper\n";
  for (const auto& r : rows) {
    out << r.name << ',' << format_double(r.estimate) << ',' << format_double(r.lower) << ','
        << format_double(r.upper) << '\n';
  }
  return out.str();
}

std::vector<ParameterEstimate> parse_parameter_table_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<ParameterEstimate> rows;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || trim(line).empty()) continue;
    const auto cells = split(line, ',');
    ParameterEstimate p;
    if (cells.size() != 4 || !parse_number(cells[1], p.estimate) || !parse_number(cells[2], p.lower) ||
        !parse_number(cells[3], p.upper)) {
      throw InputError("parameter table line " + std::to_string(lineno) + ": malformed row");
    }
    p.name = cells[0];
    rows.push_back(p);
  }
  return rows;
}

std::string smoothing_csv(const SmoothingReport& r) {
  std::ostringstream out;
  out << "t,state,prob,se,lower,upper,most_likely\n";
  for (Eigen::Index t = 0; t < r.probs.cols(); ++t) {
    for (Eigen::Index i = 0; i < r.probs.rows(); ++i) {
      out << t + 1 << ',' << i + 1 << ',' << format_double(r.probs(i, t)) << ',' << format_double(r.se(i, t)) << ','
          << format_double(r.ci_lower(i, t)) << ',' << format_double(r.ci_upper(i, t)) << ','
          << r.most_likely_state[static_cast<std::size_t>(t)] << '\n';
    }
  }
  return out.str();
}

std::string records_csv(const std::vector<studies::StudyRecord>& records, const std::vector<std::string>& names) {
  std::ostringstream out;
  out << "replication,optimizer,duration_ns,iterations,status,nll,found_global";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (const auto& r : records) {
    out << r.replication << ',' << r.optimizer_id << ',' << r.duration_ns << ',' << r.iterations << ','
        << optim::to_string(r.status) << ',' << format_double(r.nll) << ','
        << (r.found_global ? (*r.found_global ? "true" : "false") : "");
    for (std::size_t k = 0; k < names.size(); ++k) {
      out << ',';
      if (static_cast<std::size_t>(r.estimates.size()) == names.size()) {
        out << format_double(r.estimates[static_cast<Eigen::Index>(k)]);
      }
    }
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Manifest and files

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw NumericalError("sha256 digest failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return out.str();
}

std::string file_sha256(const std::filesystem::path& path) { return sha256_hex(read_text(path)); }

std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json to_json(const RunManifest& m) {
  return {{"tool", m.tool},
          {"version", m.version},
          {"seed", m.seed},
          {"config_hash", m.config_hash},
          {"input_digest", m.input_digest},
          {"started_at", m.started_at},
          {"finished_at", m.finished_at}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw InputError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_with_manifest(const std::filesystem::path& path, const std::string& text, const RunManifest& manifest) {
  write_text(path, text);
  write_text(path.string() + ".manifest.json", to_json(manifest).dump(2) + "\n");
}

}  // namespace hmmkit::io
