#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "carbamm/ir/solver.hpp"
#include "carbamm/market/carbon.hpp"
#include "carbamm/market/demand.hpp"
#include "carbamm/models/chain.hpp"
#include "carbamm/models/params.hpp"

namespace carbamm::scenario {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Seeded stand-in for measured wind and solar availability.
struct SynthSpec {
  std::uint64_t seed = 42;
  double wind_mean = 0.4;         // fraction of installed capacity
  double wind_volatility = 0.25;  // stationary standard deviation, same units
  double wind_persistence = 0.95; // hourly AR(1) coefficient
  double wind_floor = 0.0;        // lower clip, fraction of capacity
  double pv_clearness_min = 0.4;  // daily clearness factor drawn from [min, 1]
  double sunrise_h = 6.0;
  double sunset_h = 18.0;

  bool operator==(const SynthSpec&) const = default;
};

models::ResProfile synth_res(const SynthSpec& spec, const models::TimeGrid& grid, double wt_capacity_mw,
                             double pv_capacity_mw);

struct GrandfatherSpec {
  double emission_t_per_t = 3.0;
  double utilization = 0.9;
  double reduction = 0.97;
  // Historical production shares of the gray and green producers; empty
  // means the capacity ratio.
  std::vector<double> shares;

  bool operator==(const GrandfatherSpec&) const = default;
};

struct Caps {
  double total_t = 0.0;
  double q_allo_t = 0.0;
  double q_rewa_t = 0.0;
};

// total = k * sum(capacities) * tau * dt * W * utilization * reduction,
// split between the initial (gray) and incentive (green) allowances by
// `shares` (two entries).
Caps grandfather_caps(const GrandfatherSpec& spec, const std::vector<double>& capacities_tph,
                      const models::TimeGrid& grid, const std::vector<double>& shares);

struct EngineSettings {
  double rho_ref = 2500.0;           // CNY/t, subproblem ammonia value
  double multiplier_big_m = 1.0e3;   // market units (MCNY/kt)
  int max_fixed_point = 3;
  int jobs = 1;
  std::string chain_lp_method = "ipm";  // LP algorithm of the weekly chain programs

  bool operator==(const EngineSettings&) const = default;
};

struct Scenario {
  std::string name = "scenario";
  std::string note;
  models::TimeGrid grid;
  std::vector<models::GaParams> ga{models::GaParams{}};
  models::ChainParams chain;
  market::DemandCurve curve;
  market::CarbonLedger carbon;
  std::optional<GrandfatherSpec> grandfather;
  // Source of the RES profile; the materialized profile lives in chain.rg.
  std::optional<SynthSpec> synth;
  EngineSettings engine;
  ir::SolveOptions solver;

  // Participating GA producers.
  std::vector<int> participants() const;
  void validate() const;
};

bool same_scenario(const Scenario& a, const Scenario& b);

// Parses a schema_version 1 document. Relative CSV paths resolve against
// base_dir. Errors carry "<origin>:<line>: " prefixes.
Scenario parse_scenario(const std::string& text, const std::string& origin = "<scenario>",
                        const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);
std::string to_json(const Scenario& scenario);

// Two columns per interval with a header row: wt_mw,pv_mw.
models::ResProfile load_profile_csv(const std::filesystem::path& path);

// Built-in nine-bus scenario with a synthetic profile.
Scenario default_scenario();

}  // namespace carbamm::scenario
