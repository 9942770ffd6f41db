#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "carbamm/ir/solver.hpp"
#include "carbamm/models/chain.hpp"
#include "carbamm/models/cone.hpp"
#include "carbamm/models/ga.hpp"
#include "carbamm/models/units.hpp"
#include "carbamm/scenario/scenario.hpp"

using namespace carbamm;
using namespace carbamm::models;

TEST_CASE("cone error at small depths") {
  CHECK(cone_epsilon(1) == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-14));
  CHECK(cone_epsilon(2) == doctest::Approx(0.0823922).epsilon(1e-6));
  for (int z = 1; z < 20; ++z) CHECK(cone_epsilon(z + 1) < cone_epsilon(z));
  CHECK(cone_epsilon(30) < 1e-15);
  CHECK_THROWS(cone_epsilon(0));
}

namespace {

// max p_m subject to the polyhedron at fixed (x, p_n), then the smallest p_m.
double min_pm(double x, double pn, int depth) {
  ir::ProgramBuilder b("cone");
  const int f = b.add_block("x", 1, x, x);
  const int n = b.add_block("pn", 1, pn, pn);
  const int m = b.add_block("pm", 1, 0.0, ir::kInf);
  add_polyhedral_cone(b, {f, 1.0, m, n}, depth, "c");
  b.add_cost(m, 1.0);
  const auto res = ir::solve(b.build());
  REQUIRE(res.solution.optimal());
  return res.solution.x[m];
}

}  // namespace

TEST_CASE("polyhedral cone is an outer approximation within its error") {
  for (int depth : {1, 2, 4, 6}) {
    const double eps = cone_epsilon(depth);
    for (double angle = 0.0; angle <= std::numbers::pi / 2 + 1e-12; angle += std::numbers::pi / 16) {
      const double x = std::cos(angle), pn = std::sin(angle);
      const double pm = min_pm(x, pn, depth);
      // Every point of the exact cone is kept ...
      CHECK(pm <= 1.0 + 1e-9);
      // ... and no kept point is further out than the error.
      CHECK(pm * (1.0 + eps) >= 1.0 - 1e-9);
    }
  }
}

TEST_CASE("polyhedral cone at depth 1 is attained in the worst direction") {
  // The worst case of the rotation scheme sits halfway between breakpoints.
  const double eps = cone_epsilon(1);
  double worst = 0.0;
  for (int k = 0; k <= 64; ++k) {
    const double a = k * std::numbers::pi / 128;
    worst = std::max(worst, 1.0 / min_pm(std::cos(a), std::sin(a), 1) - 1.0);
  }
  CHECK(worst == doctest::Approx(eps).epsilon(1e-6));
}

TEST_CASE("gray producer emissions and program shape") {
  GaParams ga;
  TimeGrid grid;
  std::vector<double> full(grid.intervals(), ga.capacity_tph);
  CHECK(ga_emissions_t(ga, grid, full) == doctest::Approx(473558.4).epsilon(1e-12));

  GaMarket mk;
  mk.carbon = market::ga_carbon_terms({1e9, 0.0, market::Mechanism::kPcim, std::nullopt}, true);
  const auto hourly = build_ga(ga, grid, mk);
  CHECK(hourly.num_cols() == 2016 + 12 + 1);
  CHECK(hourly.params().size() == 13);  // rival[0..11], rho_ca
  CHECK(hourly.param_index("rho_ca") >= 0);

  mk.resolution = GaResolution::kWeekly;
  const auto weekly = build_ga(ga, grid, mk);
  CHECK(weekly.num_cols() == 12 + 1);
}

TEST_CASE("gray producer with a pinned load range produces at capacity") {
  GaParams ga;
  ga.load_min = ga.load_max = 1.0;
  TimeGrid grid{1, 24, 1.0};
  GaMarket mk;
  mk.carbon = market::ga_carbon_terms({ir::kInf, 0.0, market::Mechanism::kM1, std::nullopt}, false);
  auto p = build_ga(ga, grid, mk).instantiate(ir::ParameterValues{{"rival[0]", 0.0}});
  const auto res = ir::solve(p);
  REQUIRE(res.solution.optimal());
  for (int t = 0; t < 24; ++t) CHECK(res.solution.x[p.col("M", t)] == doctest::Approx(ga.capacity_tph));
  CHECK(res.solution.x[p.col("D")] * units::kBulk == doctest::Approx(24 * ga.capacity_tph));
  CHECK(p.upper()[p.col("q_ga")] == 0.0);
}

TEST_CASE("invalid gray producer parameters are rejected") {
  GaParams ga;
  ga.load_min = 0.8;
  ga.load_max = 0.5;
  CHECK_THROWS_AS(ga.validate(), ir::ModelError);
  ga = GaParams{};
  ga.emission_t_per_t = 0.0;
  CHECK_THROWS_AS(ga.validate(), ir::ModelError);
}

namespace {

struct WeekRun {
  scenario::Scenario sc = scenario::default_scenario();
  Horizon h = Horizon::week(sc.grid, 0);
  ir::ConvexProgram prog;
  ir::Solution sol;

  WeekRun() {
    ChainOptions opt;
    opt.ammonia_value = {2500.0};
    prog = build_chain(sc.chain, h, opt);
    ir::SolveOptions o;
    o.lp_method = "ipm";
    const auto res = ir::solve(prog, o);
    REQUIRE(res.solution.optimal());
    sol = res.solution;
  }
  double x(std::string_view block, int i = 0) const { return sol.x[prog.col(block, i)]; }
};

}  // namespace

TEST_CASE("weekly chain program satisfies its physical identities") {
  WeekRun run;
  const auto& sc = run.sc;
  const int T = run.h.intervals();
  CHECK(ir::max_violation(run.prog, run.sol.x) <= 1e-6);
  CHECK(ir::kkt_residuals(run.prog, run.sol).max() <= 1e-6);

  const double h2a = units::kHydrogen * sc.chain.ra.eta_h2a;
  const double p2a = units::kPower * sc.chain.ra.eta_p2a;
  for (int t = 0; t < T; ++t) {
    CHECK(std::abs(run.x("ra.M", t) - run.x("ra.h2_use", t) * h2a) <= 1e-7);
    CHECK(std::abs(run.x("ra.M", t) - run.x("ra.asy", t) * p2a) <= 1e-7);
    CHECK(run.x("hp.h2_pro", t) == doctest::Approx(run.x("hp.ae", t) * units::kPower * sc.chain.hp.eta_p2h /
                                                     units::kHydrogen));
  }

  // Weymouth tightness on pipes that carry hydrogen.
  const auto& net = sc.chain.hp.pipeline;
  const double eps = cone_epsilon(net.depth);
  for (std::size_t e = 0; e < net.pipes.size(); ++e) {
    const auto& pipe = net.pipes[e];
    for (int t = 0; t < T; ++t) {
      const double f = run.x("hp.pipe.flow", static_cast<int>(e) * T + t) * units::kHydrogen / pipe.k_gf;
      if (f < 1e-4) continue;
      const double pm = run.x("hp.pressure", pipe.from * T + t);
      const double pn = run.x("hp.pressure", pipe.to * T + t);
      const double gap = std::hypot(f, pn) / pm - 1.0;
      CHECK(gap <= eps + 1e-6);
      CHECK(gap >= -eps - 1e-6);
    }
  }
}

TEST_CASE("battery with lossless conversion charges what it discharges over a week") {
  auto sc = scenario::default_scenario();
  sc.chain.rg.bes.eta_charge = sc.chain.rg.bes.eta_discharge = 1.0;
  sc.chain.rg.bes.self_discharge = 0.0;
  const auto h = Horizon::week(sc.grid, 1);
  ChainOptions opt;
  opt.ammonia_value = {2500.0};
  const auto prog = build_chain(sc.chain, h, opt);
  ir::SolveOptions o;
  o.lp_method = "ipm";
  const auto res = ir::solve(prog, o);
  REQUIRE(res.solution.optimal());
  double in = 0.0, out = 0.0;
  for (int t = 0; t < h.intervals(); ++t) {
    in += res.solution.x[prog.col("rg.bes.in", t)];
    out += res.solution.x[prog.col("rg.bes.out", t)];
  }
  CHECK(in == doctest::Approx(out).epsilon(1e-7));
}

TEST_CASE("zero-capacity ammonia tank sells each week's production") {
  auto sc = scenario::default_scenario();
  sc.chain.ra.ast_capacity_t = 0.0;
  std::vector<double> yield(sc.grid.weeks, 2000.0);
  const auto p = build_ra_trading(sc.chain.ra, sc.grid, sc.curve, yield);
  ir::ParameterValues pv;
  for (int w = 0; w < sc.grid.weeks; ++w) pv["rival[" + std::to_string(w) + "]"] = 10.0;
  const auto res = ir::solve(p.instantiate(pv));
  REQUIRE(res.solution.optimal());
  for (int w = 0; w < sc.grid.weeks; ++w) {
    CHECK(res.solution.x[p.col("D", w)] * units::kBulk == doctest::Approx(2000.0));
  }
}

TEST_CASE("weekly totals of an hourly schedule") {
  TimeGrid g{2, 3, 0.5};
  const auto w = weekly_totals({1, 2, 3, 4, 5, 6}, g);
  REQUIRE(w.size() == 2);
  CHECK(w[0] == doctest::Approx(3.0));
  CHECK(w[1] == doctest::Approx(7.5));
}

TEST_CASE("non-radial networks are rejected") {
  auto sc = scenario::default_scenario();
  sc.chain.rg.network.branches.push_back({0, 8, 0.01, 0.01});
  CHECK_THROWS(sc.validate());
}
