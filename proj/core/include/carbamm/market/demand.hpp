#pragma once

#include "carbamm/ir/program.hpp"

namespace carbamm::market {

// Weekly inverse demand rho = rho_max - (d_ga + d_ra) / k.
struct DemandCurve {
  double rho_max = 2900.0;  // CNY/t
  double k = 35.0;          // t^2/CNY per week

  void validate() const;
};

double inverse_demand(double d_ga, double d_ra, const DemandCurve& curve);

// Cost-form seller revenue -rho(own + rival) * own expanded as
// linear*own + quadratic*own^2 + cross*own*rival, in the given units.
struct RevenueTerms {
  double linear = 0.0;
  double quadratic = 0.0;
  double cross = 0.0;

  double cost(double own, double rival) const {
    return linear * own + quadratic * own * own + cross * own * rival;
  }
  double marginal_cost(double own, double rival) const {
    return linear + 2.0 * quadratic * own + cross * rival;
  }
};

RevenueTerms revenue_terms(const DemandCurve& curve, double quantity_unit_t = 1.0,
                           double money_unit_cny = 1.0);

double marginal_revenue(double own, double rival, const DemandCurve& curve);

// Adds the Cournot revenue of column `own` with rival sales as parameter.
void add_cournot_revenue(ir::ProgramBuilder& builder, int own, int rival_param,
                         const RevenueTerms& terms);

// Largest total weekly sales keeping the price nonnegative, in t.
inline double max_total_sales(const DemandCurve& curve) { return curve.k * curve.rho_max; }

}  // namespace carbamm::market
