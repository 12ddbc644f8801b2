#pragma once

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "hmmkit/errors.hpp"

namespace hmmkit::cli {

enum ExitCode : int { Success = 0, InputFailure = 1, NumericalFailure = 2 };

struct OptimizerFlags {
  std::string opt = "newton";
  std::string grad = "supplied";  ///< supplied | fd
  std::string hess = "auto";      ///< supplied | none | auto (supplied for newton)
  int max_iter = 10000;
};

struct FitOptions {
  std::string data;
  bool header = false;
  std::string family = "poisson";
  int states = 2;
  std::string init;  ///< model JSON; empty means data-driven starting values
  OptimizerFlags optimizer;
  double level = 0.95;
  std::string out = "fit";
};

struct SimulateOptions {
  std::string model;
  std::size_t T = 200;
  std::uint64_t seed = 1;
  std::string out = "series.csv";
};

struct SmoothOptions {
  std::string data;
  bool header = false;
  std::string model;
  std::string family;  ///< optional cross-check against the model
  double level = 0.95;
  std::string out = "smooth";
  std::string plot_data;
};

struct BootstrapOptionsCli {
  FitOptions fit;
  int B = 200;
  std::uint64_t seed = 1;
};

struct StudyOptions {
  std::string config;
  std::string out = "study";
  std::string plot_data;
};

struct SelectOptions {
  std::string data;
  bool header = false;
  std::string family = "poisson";
  int m_min = 1;
  int m_max = 3;
  OptimizerFlags optimizer;
  std::string out = "select";
};

int cmd_fit(const FitOptions& o);
int cmd_simulate(const SimulateOptions& o);
int cmd_smooth(const SmoothOptions& o);
int cmd_bootstrap(const BootstrapOptionsCli& o);
int cmd_study(const StudyOptions& o);
int cmd_select(const SelectOptions& o);

/// Runs a command and maps library exceptions to exit codes with a message on stderr.
template <class F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const DegenerateData& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return NumericalFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return InputFailure;
}

}  // namespace hmmkit::cli
