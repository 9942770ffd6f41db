#include "carbamm/market/demand.hpp"

namespace carbamm::market {

void DemandCurve::validate() const {
  if (!(rho_max > 0)) throw ir::ModelError("market.rho_max must be > 0");
  if (!(k > 0)) throw ir::ModelError("market.k_am must be > 0");
}

double inverse_demand(double d_ga, double d_ra, const DemandCurve& curve) {
  if (d_ga < 0 || d_ra < 0) throw ir::ModelError("inverse_demand: negative quantity");
  return curve.rho_max - (d_ga + d_ra) / curve.k;
}

RevenueTerms revenue_terms(const DemandCurve& curve, double q, double m) {
  RevenueTerms t;
  t.linear = -curve.rho_max * q / m;
  t.quadratic = q * q / (curve.k * m);
  t.cross = t.quadratic;
  return t;
}

double marginal_revenue(double own, double rival, const DemandCurve& curve) {
  return curve.rho_max - (2.0 * own + rival) / curve.k;
}

void add_cournot_revenue(ir::ProgramBuilder& b, int own, int rival_param, const RevenueTerms& t) {
  b.add_cost(own, t.linear);
  b.add_quadratic(own, own, t.quadratic);
  b.add_cost_param(own, rival_param, t.cross);
}

}  // namespace carbamm::market
