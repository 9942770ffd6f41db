#pragma once

#include <array>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "carbamm/ir/solver.hpp"
#include "carbamm/market/carbon.hpp"
#include "carbamm/market/demand.hpp"
#include "carbamm/models/chain.hpp"
#include "carbamm/models/params.hpp"
#include "carbamm/scenario/scenario.hpp"

namespace carbamm::equilibrium {

class EquilibriumError : public std::runtime_error {
 public:
  enum class Kind { kInfeasible, kCertification };
  EquilibriumError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Optimal operation of the chain in one week.
struct WeekSolution {
  int week = 0;
  double ammonia_value = 0.0;  // CNY/t used in the objective
  double yield_t = 0.0;
  std::vector<double> x;       // columns of build_chain for this week
  std::vector<double> row_dual;
  double objective = 0.0;      // chain money units
  double residual = 0.0;       // max KKT residual of the LP
  double seconds = 0.0;
};

struct WeeklyYield {
  double rho_ref = 0.0;
  std::vector<WeekSolution> weeks;

  std::vector<double> yield_t() const;
};

// Week-w chain program with ammonia valued at rho_ref; carbon and storage
// across weeks are left out.
WeekSolution solve_weekly_sp(const scenario::Scenario& scenario, int week, double rho_ref);
WeeklyYield solve_weekly_sps(const scenario::Scenario& scenario, double rho_ref, int jobs = 1);

// Linear tie-break objective of the outer system. kFeasibility keeps the
// pure feasibility problem.
enum class OuterObjective {
  kFeasibility,
  kMaxRaSales,
  kMinRaSales,
  kMaxGaSales,
  kMinGaSales,
  kMaxCarbonPrice,
  kMinCarbonPrice,
};
std::string to_string(OuterObjective objective);

// Market-level data of the outer Nash-Cournot system.
struct OuterProblem {
  models::TimeGrid grid;
  std::vector<models::GaParams> ga;
  std::optional<models::RaParams> ra;  // absent: gray producers only
  std::vector<double> yield_t;         // weekly green production, t
  market::DemandCurve curve;
  market::CarbonLedger carbon;
  std::optional<double> pinned_q_all_t;
  double multiplier_big_m = 1.0e3;
  OuterObjective objective = OuterObjective::kFeasibility;
  ir::SolveOptions solver;
};

OuterProblem outer_problem(const scenario::Scenario& scenario, const std::vector<double>& yield_t);

struct PlayerCertificate {
  std::string name;
  ir::KktResiduals residuals;
};

struct OuterEquilibrium {
  std::vector<double> ammonia_price;            // CNY/t per week
  double carbon_price = 0.0;                    // CNY/t
  std::vector<std::vector<double>> ga_sales_t;  // [ga][week]
  std::vector<double> ga_purchase_t;            // allowances bought per GA
  std::vector<double> ra_sales_t;               // per week
  std::vector<double> ast_t;                    // AST level at week start
  std::vector<double> ammonia_value;            // marginal AST value, CNY/t per week
  std::vector<double> yield_t;
  double q_all_t = 0.0;
  std::vector<double> ga_market_revenue;        // CNY, weekly GA programs
  double ra_market_revenue = 0.0;               // CNY, green ammonia sales
  std::vector<double> x;                        // joint KKT columns
  std::vector<int> binaries;
  std::vector<PlayerCertificate> players;
  std::vector<ir::BigMFlag> big_m_flags;
  bool carbon_price_at_bound = false;
  double multiplier_big_m = 0.0;
  double seconds = 0.0;
  long nodes = 0;
  std::vector<std::string> issues;  // certification problems, empty when certified

  double max_residual() const;
};

OuterEquilibrium solve_outer(const OuterProblem& problem);

struct Revenues {
  double rg = 0.0;            // CNY, operation only
  double hp = 0.0;
  double ra = 0.0;            // operation and ammonia sales
  double carbon = 0.0;        // allowance sales of the chain
  std::vector<double> ga;     // per GA, net of allowance purchases

  double rep2a() const { return rg + hp + ra + carbon; }
  double ga_total() const;
};

struct Timings {
  double sp = 0.0;
  double outer = 0.0;
  double inner = 0.0;
  double verify = 0.0;
};

struct EquilibriumResult {
  std::string scenario;
  market::CarbonLedger carbon;
  OuterEquilibrium outer;
  std::vector<WeekSolution> inner;
  models::ChainPrices prices;             // CNY/MWh and CNY/Nm3 per interval
  std::vector<int> degenerate_intervals;  // intervals with no trade on any clearing row
  Revenues revenues;
  double gray_yield_t = 0.0;
  double green_yield_t = 0.0;
  double emissions_t = 0.0;
  double average_ammonia_price = 0.0;
  std::vector<double> ga_utilization;
  double ra_utilization = 0.0;
  double inner_residual = 0.0;
  double yield_mismatch = 0.0;  // max relative gap of inner and outer weekly yields
  int fixed_point_iterations = 0;
  Timings timings;
  std::vector<std::string> issues;

  bool certified() const { return issues.empty(); }
};

// Chain programs solved with ammonia valued per week at `ammonia_value`.
std::vector<WeekSolution> solve_inner(const scenario::Scenario& scenario, const std::vector<double>& ammonia_value,
                                      int jobs = 1);

// Prices, revenues and aggregates of an outer equilibrium and its inner
// solutions.
EquilibriumResult assemble(const scenario::Scenario& scenario, const OuterEquilibrium& outer,
                           std::vector<WeekSolution> inner);

struct RunOptions {
  std::optional<double> pinned_q_all_t;
  OuterObjective objective = OuterObjective::kFeasibility;
};

// Full pipeline with caches for the weekly solves, so repeated runs on one
// scenario only pay for the outer system and new ammonia values.
class Pipeline {
 public:
  explicit Pipeline(scenario::Scenario scenario);

  const scenario::Scenario& scenario() const { return scenario_; }
  const WeeklyYield& yields();
  // Swaps the gray producers and the carbon ledger. The chain caches stay,
  // since the weekly programs do not depend on either. Not safe while a
  // solve is running.
  void set_market(std::vector<models::GaParams> ga, const market::CarbonLedger& carbon);
  // Runs with the scenario's carbon ledger unless one is given.
  EquilibriumResult solve(const RunOptions& options = {});
  EquilibriumResult solve(const market::CarbonLedger& carbon, const RunOptions& options = {});

 private:
  std::vector<WeekSolution> inner(const std::vector<double>& ammonia_value);

  scenario::Scenario scenario_;
  std::optional<WeeklyYield> yields_;
  double sp_seconds_ = 0.0;
  std::mutex mutex_;
  std::vector<std::pair<std::vector<double>, std::vector<WeekSolution>>> inner_cache_;
};

EquilibriumResult solve_equilibrium(const scenario::Scenario& scenario, const RunOptions& options = {});

struct Deviation {
  std::string stakeholder;
  double objective = 0.0;    // at the equilibrium, CNY
  double best = 0.0;         // lower bound of the best unilateral response, CNY
  double improvement = 0.0;  // relative
};

struct DeviationReport {
  std::vector<Deviation> deviations;
  double grid_improvement = 0.0;  // best relative gain found by the GA quantity scans

  double max_improvement() const;
};

// Re-solves every stakeholder's own program at the equilibrium prices.
// Quadratic programs are bounded through their tangent LP at the
// equilibrium point, which never understates the possible gain.
DeviationReport verify_equilibrium(const EquilibriumResult& result, const scenario::Scenario& scenario,
                                   int grid_points = 201);

struct AllowanceSplitReport {
  std::vector<std::string> objectives;
  std::vector<std::array<double, 3>> splits;  // q_rg, q_hp, q_ra in t
  std::vector<double> q_all_t;
  double spread = 0.0;
  bool distinct_splits = false;
};

// Allowance sales of the chain under several tie-breaking objectives, solved
// jointly with the week-0 chain program at the equilibrium prices.
AllowanceSplitReport allowance_split_check(const EquilibriumResult& result, const scenario::Scenario& scenario);

struct StabilityRow {
  OuterObjective objective;
  double rep2a_market = 0.0;  // green ammonia sales revenue, CNY
  std::vector<double> ga;     // GA revenues, CNY
  double carbon = 0.0;        // allowance sales, CNY
  double max_value_gap = 0.0; // ammonia value difference to the feasibility run, CNY/t
};

struct StabilityReport {
  std::vector<StabilityRow> rows;
  double max_relative_change = 0.0;
};

// Re-solves the outer system under the tie-break objectives and compares
// market revenues with the feasibility run.
StabilityReport stability_check(const scenario::Scenario& scenario, const std::vector<double>& yield_t,
                                const std::optional<double>& pinned_q_all_t = std::nullopt);

}  // namespace carbamm::equilibrium
