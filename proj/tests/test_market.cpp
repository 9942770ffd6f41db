#include <doctest.h>

#include <cmath>
#include <random>

#include "carbamm/ir/solver.hpp"
#include "carbamm/market/carbon.hpp"
#include "carbamm/market/demand.hpp"

using namespace carbamm;
using namespace carbamm::market;

TEST_CASE("inverse demand") {
  DemandCurve c;
  CHECK(inverse_demand(0, 0, c) == doctest::Approx(2900.0));
  CHECK(inverse_demand(10500, 10500, c) == doctest::Approx(2300.0));
  CHECK(inverse_demand(max_total_sales(c), 0, c) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(inverse_demand(-1, 0, c), ir::ModelError);
  CHECK_THROWS_AS((DemandCurve{0.0, 35.0}.validate()), ir::ModelError);
  CHECK_THROWS_AS((DemandCurve{2900.0, -1.0}.validate()), ir::ModelError);
}

TEST_CASE("revenue terms reproduce price times quantity in scaled units") {
  DemandCurve c;
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.0, 40000.0);
  for (int i = 0; i < 50; ++i) {
    const double own = u(rng), rival = u(rng);
    const double revenue = inverse_demand(own, rival, c) * own;
    const auto t = revenue_terms(c);
    CHECK(-t.cost(own, rival) == doctest::Approx(revenue).epsilon(1e-12));
    const auto s = revenue_terms(c, 1e3, 1e6);
    CHECK(-s.cost(own / 1e3, rival / 1e3) * 1e6 == doctest::Approx(revenue).epsilon(1e-12));
  }
}

TEST_CASE("marginal revenue matches a central difference") {
  DemandCurve c;
  const double own = 8000, rival = 12000, h = 1e-2;
  auto rev = [&](double q) { return inverse_demand(q, rival, c) * q; };
  const double fd = (rev(own + h) - rev(own - h)) / (2 * h);
  CHECK(marginal_revenue(own, rival, c) == doctest::Approx(fd).epsilon(1e-9));
  CHECK(-revenue_terms(c).marginal_cost(own, rival) == doctest::Approx(fd).epsilon(1e-9));
}

namespace {

// One seller with unit cost `cost` (CNY/t) against a rival, in kt and MCNY.
double best_response(double rival_t, double cost, const DemandCurve& c) {
  ir::ProgramBuilder b("seller");
  const int d = b.add_block("d", 1, 0.0, max_total_sales(c) / 1e3);
  add_cournot_revenue(b, d, b.param("rival"), revenue_terms(c, 1e3, 1e6));
  b.add_cost(d, cost * 1e3 / 1e6);
  const auto p = b.build().instantiate(ir::ParameterValues{{"rival", rival_t / 1e3}});
  const auto res = ir::solve(p);
  REQUIRE(res.solution.optimal());
  return res.solution.x[0] * 1e3;
}

}  // namespace

TEST_CASE("symmetric Cournot duopoly by best-response iteration") {
  DemandCurve c;
  double a = 0.0, b = 0.0;
  for (int it = 0; it < 200; ++it) {
    a = best_response(b, 2000.0, c);
    b = best_response(a, 2000.0, c);
  }
  CHECK(a == doctest::Approx(10500.0).epsilon(1e-5));
  CHECK(b == doctest::Approx(10500.0).epsilon(1e-5));
  CHECK(inverse_demand(a, b, c) == doctest::Approx(2300.0).epsilon(1e-5));
}

TEST_CASE("carbon terms per mechanism") {
  CarbonLedger l{344513.7, 68902.7, Mechanism::kM1, std::nullopt};
  auto t = ga_carbon_terms(l, true);
  CHECK_FALSE(t.cap);
  CHECK(t.price == GaCarbonTerms::Price::kNone);
  CHECK(t.purchase_max_t == 0.0);

  l.mechanism = Mechanism::kM2;
  t = ga_carbon_terms(l, true);
  CHECK(t.cap);
  CHECK(t.price == GaCarbonTerms::Price::kNone);
  CHECK(t.purchase_max_t == 0.0);

  l.mechanism = Mechanism::kM3;
  l.fixed_price = 60.0;
  t = ga_carbon_terms(l, true);
  CHECK(t.price == GaCarbonTerms::Price::kFixed);
  CHECK(t.fixed_price == 60.0);
  CHECK(t.purchase_max_t == l.q_rewa_t);
  t = ga_carbon_terms(l, false);
  CHECK(t.price == GaCarbonTerms::Price::kNone);

  l.mechanism = Mechanism::kPcim;
  t = ga_carbon_terms(l, true);
  CHECK(t.cap);
  CHECK(t.price == GaCarbonTerms::Price::kMarket);
  CHECK(std::isinf(t.purchase_max_t));

  l.q_allo_t = ir::kInf;
  CHECK_FALSE(ga_carbon_terms(l, true).cap);
}

TEST_CASE("carbon ledger validation") {
  CarbonLedger l{1.0, 1.0, Mechanism::kM3, std::nullopt};
  CHECK_THROWS_AS(l.validate(), ir::ModelError);
  l.fixed_price = -1.0;
  CHECK_THROWS_AS(l.validate(), ir::ModelError);
  l.fixed_price = 10.0;
  CHECK_NOTHROW(l.validate());
  l.q_rewa_t = ir::kInf;
  CHECK_THROWS_AS(l.validate(), ir::ModelError);
}

TEST_CASE("allowance supply sells everything at a positive price") {
  CarbonLedger l{344513.7, 68902.7, Mechanism::kPcim, std::nullopt};
  const auto p = build_carbon_supply(l);
  REQUIRE(p.param_index("rho_ca") >= 0);
  auto res = ir::solve(p.instantiate(ir::ParameterValues{{"rho_ca", 0.05}}));
  REQUIRE(res.solution.optimal());
  CHECK(res.solution.x[p.col("q_all")] * 1e3 == doctest::Approx(68902.7));
  CHECK(res.solution.upper_dual[p.col("q_all")] == doctest::Approx(0.05));

  const auto pinned = build_carbon_supply(l, 20000.0);
  CHECK(pinned.lower()[0] == doctest::Approx(20.0));
  CHECK(pinned.upper()[0] == doctest::Approx(20.0));
  CHECK_THROWS_AS(build_carbon_supply(l, 70000.0), ir::ModelError);
  CHECK_THROWS_AS(build_carbon_supply(l, -1.0), ir::ModelError);
}

TEST_CASE("mechanism names") {
  for (auto m : {Mechanism::kM1, Mechanism::kM2, Mechanism::kM3, Mechanism::kPcim}) {
    CHECK(parse_mechanism(to_string(m)) == m);
  }
  CHECK(parse_mechanism("PCIM") == Mechanism::kPcim);
  CHECK_THROWS_AS(parse_mechanism("m4"), ir::ModelError);
}
