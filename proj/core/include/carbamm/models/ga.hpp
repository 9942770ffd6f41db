#pragma once

#include "carbamm/ir/program.hpp"
#include "carbamm/market/carbon.hpp"
#include "carbamm/market/demand.hpp"
#include "carbamm/models/params.hpp"

namespace carbamm::models {

enum class GaResolution { kHourly, kWeekly };

struct GaMarket {
  market::DemandCurve curve;
  market::GaCarbonTerms carbon;
  GaResolution resolution = GaResolution::kHourly;
};

// Gray ammonia producer in kt / MCNY. Blocks: "M" (t/h, hourly only), "D"
// (kt per week), "q_ga" (kt). Parameters: "rival[w]" (kt), and "rho_ca"
// (MCNY/kt) when the carbon price is a market price.
ir::ConvexProgram build_ga(const GaParams& ga, const TimeGrid& grid, const GaMarket& market);

// Emissions of an hourly production schedule, in t.
double ga_emissions_t(const GaParams& ga, const TimeGrid& grid, std::span<const double> m_tph);

}  // namespace carbamm::models
