#pragma once

#include <optional>
#include <vector>

#include "carbamm/ir/program.hpp"
#include "carbamm/market/demand.hpp"
#include "carbamm/models/params.hpp"

namespace carbamm::models {

// Chain programs use power in 100 MW, hydrogen in 1e4 Nm3 (Nm3/h for
// flows), hourly ammonia in t/h, weekly ammonia in kt and money in 1e4 CNY.
// Storage is cyclic inside each week and ramps apply within a week only.

// Per-interval settlement prices over a horizon, in CNY/MWh and CNY/Nm3.
struct ChainPrices {
  std::vector<double> e_hp;
  std::vector<double> e_ra;
  std::vector<double> h2;

  static ChainPrices zeros(int intervals);
};

struct ChainParams {
  RgParams rg;
  HpParams hp;
  RaParams ra;
};

struct ChainOptions {
  // Value of one tonne of green ammonia per week of the horizon (CNY/t).
  std::vector<double> ammonia_value;
  // Optional pinned weekly production per week of the horizon (t).
  std::vector<std::optional<double>> yield_t;
};

// Joint program of RG, HP and RA over the horizon with the clearing rows
// "clear_e_hp[t]", "clear_e_ra[t]" and "clear_h2[t]". Trade payments
// cancel, so only physical costs and the ammonia valuation remain. Block
// names are prefixed "rg.", "hp." and "ra.".
ir::ConvexProgram build_chain(const ChainParams& chain, const Horizon& horizon,
                              const ChainOptions& options);

// Individual programs at given settlement prices. Carbon sales are
// separable from operation and are not part of these programs.
ir::ConvexProgram build_rg(const RgParams& rg, const Horizon& horizon, const ChainPrices& prices);
ir::ConvexProgram build_hp(const HpParams& hp, const Horizon& horizon, const ChainPrices& prices);

// Full-horizon RA program: operation, AST ("ast", kt at week start),
// weekly sales ("sales", kt) with Cournot revenue against fixed rival
// sales (t per week).
struct RaMarket {
  market::DemandCurve curve;
  std::vector<double> rival_t;
};
ir::ConvexProgram build_ra(const RaParams& ra, const TimeGrid& grid, const ChainPrices& prices,
                           const RaMarket& market);

// Trading problem of the chain in market units (kt, MCNY): weekly sales
// "D" and AST states "S" with the weekly yields as data. Parameters
// "rival[w]" carry the rivals' sales in kt.
ir::ConvexProgram build_ra_trading(const RaParams& ra, const TimeGrid& grid,
                                   const market::DemandCurve& curve,
                                   const std::vector<double>& yield_t);

// Weekly production of an hourly schedule (t/h), in t.
std::vector<double> weekly_totals(const std::vector<double>& hourly, const TimeGrid& grid);

}  // namespace carbamm::models
