#include <doctest.h>

#include <filesystem>

#include "carbamm/equilibrium/engine.hpp"
#include "carbamm/market/demand.hpp"

using namespace carbamm;
using namespace carbamm::equilibrium;

namespace {

OuterProblem gray_duopoly() {
  OuterProblem p;
  p.grid = models::TimeGrid{};
  models::GaParams a, b;
  a.name = "GA1";
  b.name = "GA2";
  p.ga = {a, b};
  p.carbon = {ir::kInf, 0.0, market::Mechanism::kM1, std::nullopt};
  return p;
}

scenario::Scenario tiny() {
  return scenario::load_scenario(std::filesystem::path(CARBAMM_TEST_DATA) / "tiny.scenario.json");
}

}  // namespace

TEST_CASE("gray duopoly without carbon constraints") {
  const auto eq = solve_outer(gray_duopoly());
  REQUIRE(eq.issues.empty());
  for (int w = 0; w < 12; ++w) {
    CHECK(eq.ga_sales_t[0][w] == doctest::Approx(10500.0).epsilon(1e-6));
    CHECK(eq.ga_sales_t[1][w] == doctest::Approx(10500.0).epsilon(1e-6));
    CHECK(eq.ammonia_price[w] == doctest::Approx(2300.0).epsilon(1e-6));
  }
  CHECK(eq.max_residual() <= 1e-6);
  CHECK(eq.big_m_flags.empty());
  CHECK(eq.q_all_t == 0.0);
}

TEST_CASE("binding emission cap under M2") {
  auto p = gray_duopoly();
  p.ga.pop_back();
  p.carbon.mechanism = market::Mechanism::kM2;
  p.carbon.q_allo_t = 300000.0;
  p.ga[0].allowance_t = 300000.0;
  const auto eq = solve_outer(p);
  REQUIRE(eq.issues.empty());
  double sold = 0.0;
  for (double d : eq.ga_sales_t[0]) sold += d;
  CHECK(sold * p.ga[0].emission_t_per_t == doctest::Approx(300000.0).epsilon(1e-7));
  // Monopoly without the cap would sell 35 * 900 / 2 = 15750 t a week,
  // beyond capacity; the cap dual is the price of the last tonne.
  CHECK(eq.carbon_price > 0.0);
}

TEST_CASE("fixed carbon price with a single buyer") {
  auto p = gray_duopoly();
  p.ga.pop_back();
  p.carbon = {300000.0, 60000.0, market::Mechanism::kM3, 50.0};
  p.ga[0].allowance_t = 300000.0;
  const auto eq = solve_outer(p);
  REQUIRE(eq.issues.empty());
  CHECK(eq.carbon_price == doctest::Approx(50.0));
  CHECK(eq.ga_purchase_t[0] <= 60000.0 + 1e-6);
  CHECK(eq.ga_purchase_t[0] > 0.0);

  p.ga.push_back(p.ga[0]);
  p.ga[1].name = "GA2";
  CHECK_THROWS_AS(solve_outer(p), ir::ModelError);
}

TEST_CASE("pipeline on a small scenario is certified and stable") {
  const auto sc = tiny();
  Pipeline pipe(sc);
  const auto r = pipe.solve();
  CAPTURE(r.issues.size());
  CHECK(r.certified());
  CHECK(r.outer.max_residual() <= 1e-6);
  CHECK(r.inner_residual <= 1e-6);
  CHECK(r.yield_mismatch <= 1e-6);
  CHECK(r.outer.carbon_price > 0.0);
  CHECK(r.outer.q_all_t == doctest::Approx(sc.carbon.q_rewa_t).epsilon(1e-7));
  CHECK(r.revenues.carbon == doctest::Approx(r.outer.q_all_t * r.outer.carbon_price).epsilon(1e-9));

  const auto dev = verify_equilibrium(r, sc);
  CHECK(dev.max_improvement() <= 1e-6);

  const auto p1 = allowance_split_check(r, sc);
  CHECK(p1.spread <= 1e-6);

  // Repeated and fresh runs agree.
  const auto again = pipe.solve();
  CHECK(again.outer.carbon_price == r.outer.carbon_price);
  CHECK(again.revenues.rep2a() == r.revenues.rep2a());
  const auto fresh = solve_equilibrium(sc);
  CHECK(fresh.outer.carbon_price == doctest::Approx(r.outer.carbon_price).epsilon(1e-9));
  CHECK(fresh.revenues.rep2a() == doctest::Approx(r.revenues.rep2a()).epsilon(1e-9));
}

TEST_CASE("pinned allowance volume") {
  const auto sc = tiny();
  Pipeline pipe(sc);
  const auto free_run = pipe.solve();
  RunOptions o;
  o.pinned_q_all_t = 0.5 * sc.carbon.q_rewa_t;
  const auto half = pipe.solve(o);
  CHECK(half.outer.q_all_t == doctest::Approx(0.5 * sc.carbon.q_rewa_t));
  CHECK(half.outer.carbon_price >= free_run.outer.carbon_price - 1e-9);
  o.pinned_q_all_t = 2.0 * sc.carbon.q_rewa_t;
  CHECK_THROWS(pipe.solve(o));
}

TEST_CASE("set_market keeps the chain and swaps the carbon ledger") {
  auto sc = tiny();
  Pipeline pipe(sc);
  const auto base = pipe.solve();
  auto carbon = sc.carbon;
  carbon.mechanism = market::Mechanism::kM2;
  pipe.set_market(sc.ga, carbon);
  const auto m2 = pipe.solve();
  CHECK(m2.revenues.carbon == 0.0);
  CHECK(m2.outer.q_all_t == 0.0);
  CHECK(m2.carbon.mechanism == market::Mechanism::kM2);
  CHECK(pipe.scenario().carbon.mechanism == market::Mechanism::kM2);
  CHECK(base.carbon.mechanism == market::Mechanism::kPcim);
}
