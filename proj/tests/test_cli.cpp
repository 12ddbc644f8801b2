#include <sys/wait.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "hmmkit/io.hpp"

using namespace hmmkit;
namespace fs = std::filesystem;

namespace {

struct Workspace {
  fs::path dir;

  explicit Workspace(const std::string& name) : dir(fs::temp_directory_path() / ("hmmkit_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }

  fs::path operator/(const std::string& f) const { return dir / f; }

  int run(const std::string& args) const {
    const std::string cmd = "cd '" + dir.string() + "' && '" HMMKIT_CLI "' " + args + " > stdout.txt 2> stderr.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string read(const std::string& f) const { return io::read_text(dir / f); }
  void write(const std::string& f, const std::string& text) const { io::write_text(dir / f, text); }
  io::json json(const std::string& f) const { return io::json::parse(read(f)); }
};

const char* kTruth = R"({"family":"poisson","gamma":[[0.95,0.05],[0.15,0.85]],"lambda":[1,7]})";

std::string drop_column(const std::string& csv, std::size_t col) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    std::istringstream cells(line);
    std::string cell;
    std::size_t k = 0;
    while (std::getline(cells, cell, ',')) {
      if (k++ != col) out += cell + ',';
    }
    out += '\n';
  }
  return out;
}

}  // namespace

TEST_CASE("fit: closed-form single-state Poisson") {
  Workspace ws("fit1");
  ws.write("x.csv", "2\n2\n2\n");
  CHECK(ws.run("fit x.csv -m 1 -o out") == 0);
  const auto j = ws.json("out.json");
  CHECK(j["converged"] == true);
  CHECK(j["optimizer"] == "newton_grhe");
  CHECK(j["model"]["lambda"][0].get<double>() == doctest::Approx(2.0).epsilon(1e-10));
  const double se = std::sqrt(j["cov_natural"][0][0].get<double>());
  CHECK(se == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-8));
  const auto rows = io::parse_parameter_table_csv(ws.read("out.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].name == "lambda1");
  CHECK(rows[0].lower == doctest::Approx(2.0 - 1.959964 * std::sqrt(2.0 / 3.0)).epsilon(1e-6));
  CHECK(fs::exists(ws / "out.json.manifest.json"));
  CHECK(fs::exists(ws / "out.csv.manifest.json"));
}

TEST_CASE("fit: input errors exit 1 without output") {
  Workspace ws("fitbad");
  ws.write("nan.csv", "1\n2\nnan\n");
  CHECK(ws.run("fit nan.csv -o out") == 1);
  CHECK_FALSE(fs::exists(ws / "out.json"));
  CHECK_FALSE(fs::exists(ws / "out.csv"));
  ws.write("text.csv", "1\nabc\n");
  CHECK(ws.run("fit text.csv -o out") == 1);
  CHECK(ws.read("stderr.txt").find("text.csv:2") != std::string::npos);
  ws.write("neg.csv", "1\n-2\n");
  CHECK(ws.run("fit neg.csv --family poisson -o out") == 1);
  CHECK(ws.run("fit missing.csv") == 1);
  CHECK(ws.run("fit neg.csv --family gaussian --opt simplex") == 1);
  CHECK(ws.run("fit neg.csv --family gaussian --opt bfgs --hess supplied") == 1);
  CHECK(ws.run("fit neg.csv --level 1.5") == 1);
  CHECK(ws.run("") == 1);
}

TEST_CASE("fit: non-convergence exits 2 and still writes results") {
  Workspace ws("fit2");
  ws.write("truth.json", kTruth);
  REQUIRE(ws.run("simulate truth.json -T 200 --seed 4 -o x.csv") == 0);
  CHECK(ws.run("fit x.csv -m 2 --opt bfgs --max-iter 1 -o out") == 2);
  const auto j = ws.json("out.json");
  CHECK(j["converged"] == false);
  CHECK(j["status"] == "max_iterations");
  CHECK(fs::exists(ws / "out.csv"));
}

TEST_CASE("simulate, fit and smooth") {
  Workspace ws("smooth");
  ws.write("truth.json", kTruth);
  REQUIRE(ws.run("simulate truth.json -T 150 --seed 8 -o x.csv") == 0);
  CHECK(fs::exists(ws / "x.csv.states"));
  CHECK(fs::exists(ws / "x.csv.manifest.json"));
  REQUIRE(ws.run("fit x.csv -m 2 --init truth.json -o fit") == 0);
  REQUIRE(ws.run("smooth x.csv --model fit.json -o sm --plot-data pd") == 0);
  const auto rep = ws.json("sm.json");
  REQUIRE(rep["probs"].size() == 2);
  REQUIRE(rep["probs"][0].size() == 150);
  for (std::size_t t = 0; t < 150; ++t) {
    const double s = rep["probs"][0][t].get<double>() + rep["probs"][1][t].get<double>();
    CHECK(std::abs(s - 1.0) < 1e-10);
  }
  const std::string csv = ws.read("sm.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 301);
  CHECK(fs::exists(ws / "pd_state1.csv"));
  CHECK(fs::exists(ws / "pd_state2.csv.manifest.json"));

  CHECK(ws.run("smooth x.csv --model fit.json --family gaussian") == 1);
  ws.write("real.csv", "0.5\n1.5\n");
  CHECK(ws.run("smooth real.csv --model fit.json") == 1);
}

TEST_CASE("smooth: single-state model") {
  Workspace ws("smooth1");
  ws.write("x.csv", "1\n4\n2\n0\n");
  REQUIRE(ws.run("fit x.csv -m 1 -o fit") == 0);
  REQUIRE(ws.run("smooth x.csv --model fit.json -o sm") == 0);
  const auto rep = ws.json("sm.json");
  for (const auto& p : rep["probs"][0]) CHECK(p.get<double>() == 1.0);
  for (const auto& s : rep["se"][0]) CHECK(s.get<double>() == 0.0);
}

TEST_CASE("select: table shape and bounds") {
  Workspace ws("select");
  ws.write("truth.json", kTruth);
  REQUIRE(ws.run("simulate truth.json -T 300 --seed 11 -o x.csv") == 0);
  REQUIRE(ws.run("select x.csv --m-min 1 --m-max 3 -o sel") == 0);
  const auto j = ws.json("sel.json");
  REQUIRE(j["rows"].size() == 3);
  int marked = 0;
  for (const auto& row : j["rows"]) marked += row["best_bic"].get<bool>();
  CHECK(marked == 1);
  CHECK(j["rows"][1]["best_bic"] == true);
  CHECK(ws.run("select x.csv --m-min 2 --m-max 9") == 1);
  CHECK(ws.run("select x.csv --m-min 3 --m-max 2") == 1);
}

TEST_CASE("bootstrap command") {
  Workspace ws("boot");
  ws.write("truth.json", kTruth);
  REQUIRE(ws.run("simulate truth.json -T 200 --seed 5 -o x.csv") == 0);
  REQUIRE(ws.run("bootstrap x.csv -m 2 --init truth.json -B 20 --seed 3 -o b") == 0);
  const auto j = ws.json("b.json");
  CHECK(j["requested"] == 20);
  CHECK(j["parameters"].size() == 8);
  CHECK(ws.run("bootstrap x.csv -m 2 -B 1") == 1);
}

TEST_CASE("study: smoke run, determinism and config errors") {
  Workspace ws("study");
  ws.write("cfg.json", std::string(R"({"design":"speed","truth":)") + kTruth +
                           R"(,"T":200,"replications":5,"optimizers":["newton_grhe","bfgs"],"seed":4})");
  const auto start = std::chrono::steady_clock::now();
  REQUIRE(ws.run("study cfg.json -o a --emit-plot-data p") == 0);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(60));
  const std::string a = ws.read("a_records.csv");
  CHECK(std::count(a.begin(), a.end(), '\n') == 11);
  CHECK(fs::exists(ws / "p_speed.csv"));
  CHECK(fs::exists(ws / "a_summary.json.manifest.json"));
  REQUIRE(ws.run("study cfg.json -o b") == 0);
  CHECK(drop_column(a, 2) == drop_column(ws.read("b_records.csv"), 2));
  CHECK(ws.json("a_records.csv.manifest.json")["config_hash"] == ws.json("b_records.csv.manifest.json")["config_hash"]);

  ws.write("bad.json", std::string(R"({"design":"speed","truth":)") + kTruth + R"(,"optimizers":["bfgs","simplex9"]})");
  CHECK(ws.run("study bad.json") == 1);
  CHECK(ws.read("stderr.txt").find("optimizers[1]") != std::string::npos);
  ws.write("broken.json", "{");
  CHECK(ws.run("study broken.json") == 1);
}

TEST_CASE("manifest config hash tracks semantic flags only") {
  Workspace ws("hash");
  ws.write("x.csv", "1\n3\n0\n2\n5\n4\n");
  REQUIRE(ws.run("fit x.csv -m 1 -o a") == 0);
  REQUIRE(ws.run("fit x.csv -m 1 -o b") == 0);
  REQUIRE(ws.run("fit x.csv -m 1 --level 0.9 -o c") == 0);
  REQUIRE(ws.run("fit x.csv -m 1 --opt bfgs -o d") == 0);
  const auto hash = [&](const std::string& f) { return ws.json(f + ".json.manifest.json")["config_hash"]; };
  CHECK(hash("a") == hash("b"));
  CHECK(hash("a") != hash("c"));
  CHECK(hash("a") != hash("d"));
  const auto m = ws.json("a.json.manifest.json");
  CHECK(m["input_digest"] == io::file_sha256(ws / "x.csv"));
  CHECK(m.contains("started_at"));
  CHECK(m["version"].get<std::string>().size() > 0);
}
