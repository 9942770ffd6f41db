#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "carbamm/allocation/allocation.hpp"
#include "carbamm/equilibrium/engine.hpp"

namespace carbamm::cli {

std::string sha256_hex(const std::string& bytes);

// Identity of a run. `id()` covers the inputs only, so repeated runs share
// it; timings live in the manifest file but not in the id.
struct Manifest {
  std::string command;
  std::map<std::string, std::string> options;  // settings that change results
  std::vector<std::string> arguments;          // raw command line, not hashed
  std::string scenario_path;  // "<builtin>" for the default scenario
  std::string scenario_sha256;
  std::string mechanism;
  std::optional<std::uint64_t> seed;
  std::string version;
  std::map<std::string, double> timings;  // seconds per stage

  std::string id() const;
  nlohmann::ordered_json to_json() const;
};

using Cell = std::variant<double, std::string>;

// Rectangular CSV with a unit row under the header and the manifest id in
// a trailing comment.
class CsvTable {
 public:
  CsvTable& column(std::string name, std::string unit);
  void add_row(std::vector<Cell> cells);
  void note(std::string line) { notes_.push_back(std::move(line)); }

  std::size_t rows() const { return rows_.size(); }
  std::string render(const std::string& manifest_id) const;

 private:
  std::vector<std::string> names_, units_, notes_;
  std::vector<std::vector<Cell>> rows_;
};

std::string format_number(double v);

nlohmann::ordered_json result_json(const equilibrium::EquilibriumResult& result);

// One row per result, labelled.
CsvTable summary_table(const std::vector<std::pair<std::string, const equilibrium::EquilibriumResult*>>& results);
CsvTable prices_table(const equilibrium::EquilibriumResult& result, const models::TimeGrid& grid);
CsvTable allocation_table(const allocation::AllocationInput& input,
                          const std::vector<allocation::AllocationResult>& results);
CsvTable perturbation_table(const allocation::PerturbationReport& report);

void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace carbamm::cli
