#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "carbamm/scenario/scenario.hpp"

namespace carbamm::cli {

enum ExitCode { kOk = 0, kInfeasible = 2, kCertification = 3, kUsage = 64 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonArgs {
  std::string scenario;  // empty: built-in default
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  int jobs = 0;  // 0 keeps the scenario's setting
  std::vector<std::string> argv;
};

struct SolveArgs {
  std::string mechanism;  // empty keeps the scenario's
  std::optional<double> fixed_price;
  bool verify = true;
};

struct SweepArgs {
  std::string param;
  std::string range;
};

struct AllocateArgs {
  std::string cam = "pcam";
};

struct PerturbArgs {
  std::string volumes;
  bool kilotonnes = false;
};

// "A:B:STEP" inclusive of B up to rounding.
std::vector<double> parse_range(const std::string& text);
// Comma list of numbers or ranges.
std::vector<double> parse_list(const std::string& text);

struct LoadedScenario {
  scenario::Scenario scenario;
  std::string path;
  std::string sha256;
};
LoadedScenario load(const CommonArgs& args);

int run_solve(const CommonArgs& common, const SolveArgs& args);
int run_sweep(const CommonArgs& common, const SweepArgs& args);
int run_allocate(const CommonArgs& common, const AllocateArgs& args);
int run_perturb(const CommonArgs& common, const PerturbArgs& args);

}  // namespace carbamm::cli
