#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "hmmkit/fit.hpp"
#include "hmmkit/inference.hpp"
#include "hmmkit/likelihood.hpp"
#include "hmmkit/optim.hpp"
#include "hmmkit/params.hpp"
#include "hmmkit/studies.hpp"

namespace hmmkit::io {

using json = nlohmann::json;

/// Shortest decimal that parses back to the same double.
std::string format_double(double x);

/// One value per line; blank lines are skipped. With `header` the first
/// non-blank line is skipped. Errors name the offending line.
ObservationSeries read_series_csv(const std::filesystem::path& path, bool header);
ObservationSeries parse_series_csv(const std::string& text, bool header, const std::string& source = "<input>");
void write_series_csv(const std::filesystem::path& path, const ObservationSeries& obs,
                      const std::vector<int>* states = nullptr);

json to_json(const NaturalParams& n);
NaturalParams natural_from_json(const json& j);

json to_json(const optim::OptimizerConfig& c);
optim::OptimizerConfig optimizer_from_json(const json& j);

json to_json(const FitResult& r);
json to_json(const SmoothingReport& r);
json to_json(const BootstrapResult& r);

json to_json(const studies::StudyConfig& c);
studies::StudyConfig study_config_from_json(const json& j);

json to_json(const studies::SpeedStudyResult& r);
json to_json(const studies::AccuracyStudyResult& r);
json to_json(const studies::RobustnessStudyResult& r);
json to_json(const studies::HybridStudyResult& r);

/// CSV with columns param, estimate, lower, upper.
std::string parameter_table_csv(const std::vector<ParameterEstimate>& rows);
std::vector<ParameterEstimate> parse_parameter_table_csv(const std::string& text);

/// Columns t, state, prob, se, lower, upper, most_likely (t and state one-based).
std::string smoothing_csv(const SmoothingReport& r);

/// One row per record; estimate columns are named after `names`.
std::string records_csv(const std::vector<studies::StudyRecord>& records, const std::vector<std::string>& names);

struct RunManifest {
  std::string tool = "hmmkit";
  std::string version;
  std::uint64_t seed = 0;
  std::string config_hash;   ///< sha256 of the canonical configuration JSON
  std::string input_digest;  ///< sha256 of the input file, empty if none
  std::string started_at;    ///< UTC, ISO 8601
  std::string finished_at;
};

std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const std::filesystem::path& path);
std::string utc_timestamp(std::chrono::system_clock::time_point t = std::chrono::system_clock::now());

json to_json(const RunManifest& m);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
/// Writes `path` and `path` + ".manifest.json".
void write_with_manifest(const std::filesystem::path& path, const std::string& text, const RunManifest& manifest);

}  // namespace hmmkit::io
