#include "carbamm/models/ga.hpp"

#include <cmath>

#include "carbamm/models/units.hpp"

namespace carbamm::models {

ir::ConvexProgram build_ga(const GaParams& ga, const TimeGrid& grid, const GaMarket& mk) {
  ga.validate();
  grid.validate();
  mk.curve.validate();
  if (ga.load_min > ga.load_max) throw ir::ModelError("ga load_min exceeds load_max");
  const int W = grid.weeks;
  const int tau = grid.intervals_per_week;
  const double dt = grid.step_h;
  const double cap = ga.capacity_tph;
  const double d_max = market::max_total_sales(mk.curve) / units::kBulk;

  ir::ProgramBuilder b("ga:" + ga.name);
  const bool hourly = mk.resolution == GaResolution::kHourly;
  int m0 = -1;
  if (hourly) {
    m0 = b.add_block("M", grid.intervals(), ga.load_min * cap, ga.load_max * cap, "t/h");
  }
  int d0 = 0;
  if (hourly) {
    d0 = b.add_block("D", W, 0.0, d_max, "kt");
  } else {
    const double week_t = tau * dt * cap / units::kBulk;
    d0 = b.add_block("D", W, std::min(ga.load_min * week_t, d_max), std::min(ga.load_max * week_t, d_max), "kt");
  }
  const double q_hi = mk.carbon.price == market::GaCarbonTerms::Price::kNone ? 0.0
                                                                              : mk.carbon.purchase_max_t / units::kBulk;
  const int q = b.add_block("q_ga", 1, 0.0, q_hi, "kt");

  const auto rev = market::revenue_terms(mk.curve, units::kBulk, units::kMarketMoney);
  for (int w = 0; w < W; ++w) {
    const int rival = b.param("rival[" + std::to_string(w) + "]");
    market::add_cournot_revenue(b, d0 + w, rival, rev);
    const int r = b.add_ge({{d0 + w, -1.0}}, -d_max, "price_floor[" + std::to_string(w) + "]");
    b.add_rhs_param(r, rival, 1.0);
  }

  std::vector<ir::Term> emis;
  if (hourly) {
    for (int t = 0; t < grid.intervals(); ++t) {
      b.add_cost(m0 + t, ga.cost_cny_per_t * dt / units::kMarketMoney);
      emis.push_back({m0 + t, ga.emission_t_per_t * dt / units::kBulk});
    }
    for (int t = 0; t + 1 < grid.intervals(); ++t) {
      b.add_ge({{m0 + t + 1, 1.0}, {m0 + t, -1.0}}, -ga.ramp_down * cap, "ramp_down[" + std::to_string(t) + "]");
      b.add_le({{m0 + t + 1, 1.0}, {m0 + t, -1.0}}, ga.ramp_up * cap, "ramp_up[" + std::to_string(t) + "]");
    }
    for (int w = 0; w < W; ++w) {
      std::vector<ir::Term> row;
      for (int t = w * tau; t < (w + 1) * tau; ++t) row.push_back({m0 + t, dt / units::kBulk});
      row.push_back({d0 + w, -1.0});
      b.add_eq(std::move(row), 0.0, "sales[" + std::to_string(w) + "]");
    }
  } else {
    for (int w = 0; w < W; ++w) {
      b.add_cost(d0 + w, ga.cost_cny_per_t * units::kBulk / units::kMarketMoney);
      emis.push_back({d0 + w, ga.emission_t_per_t});
    }
  }

  switch (mk.carbon.price) {
    case market::GaCarbonTerms::Price::kNone: break;
    case market::GaCarbonTerms::Price::kFixed:
      b.add_cost(q, mk.carbon.fixed_price * units::kBulk / units::kMarketMoney);
      break;
    case market::GaCarbonTerms::Price::kMarket:
      b.add_cost_param(q, b.param("rho_ca"), 1.0);
      break;
  }
  if (mk.carbon.cap && std::isfinite(ga.allowance_t)) {
    emis.push_back({q, -1.0});
    b.add_le(std::move(emis), ga.allowance_t / units::kBulk, "cap");
  }
  return b.build();
}

double ga_emissions_t(const GaParams& ga, const TimeGrid& grid, std::span<const double> m) {
  double s = 0.0;
  for (double v : m) s += v;
  return ga.emission_t_per_t * grid.step_h * s;
}

}  // namespace carbamm::models
