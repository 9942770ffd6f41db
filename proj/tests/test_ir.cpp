#include <doctest.h>

#include <cmath>

#include "carbamm/ir/kkt_system.hpp"
#include "carbamm/ir/lp_format.hpp"
#include "carbamm/ir/solver.hpp"

using namespace carbamm::ir;

TEST_CASE("builder keeps blocks, bounds and row kinds") {
  ProgramBuilder b("p");
  const int x = b.add_block("x", 3, 0.0, 2.0, "MW");
  const int y = b.add_block("y", 1, -kInf, kInf);
  b.add_ge({{x, 1.0}, {y, 1.0}}, 1.0, "g");
  b.add_le({{x + 1, 2.0}}, 3.0, "l");
  const auto p = b.build();
  CHECK(p.num_cols() == 4);
  CHECK(p.col("x", 2) == x + 2);
  CHECK(p.col("y") == y);
  CHECK(p.block("x").unit == "MW");
  CHECK(p.kind(0) == RowKind::kGreaterEqual);
  // "<=" rows are stored negated.
  CHECK(p.kind(1) == RowKind::kGreaterEqual);
  CHECK(p.rhs(1) == doctest::Approx(-3.0));
  CHECK(p.row(1)[0].coef == doctest::Approx(-2.0));
  CHECK(p.find_row("l") == 1);
  CHECK_THROWS_AS(p.col("nope"), ModelError);
}

TEST_CASE("unpack and pack round trip") {
  ProgramBuilder b;
  b.add_block("a", 2, 0, 1);
  b.add_block("b", 1, 0, 1);
  const auto p = b.build();
  const std::vector<double> x{0.1, 0.2, 0.3};
  const auto s = p.unpack(x);
  CHECK(s.at("a").size() == 2);
  CHECK(p.pack(s) == x);
}

TEST_CASE("parameters fold into costs and right-hand sides") {
  ProgramBuilder b;
  const int x = b.add_block("x", 1, 0, 10);
  const int r = b.add_ge({{x, 1.0}}, 1.0, "floor");
  const int k = b.param("k");
  b.add_rhs_param(r, k, 2.0);
  b.add_cost_param(x, k, 0.5);
  b.add_cost(x, 1.0);
  const auto p = b.build().instantiate(ParameterValues{{"k", 3.0}});
  CHECK(p.rhs(0) == doctest::Approx(7.0));
  CHECK(p.cost()[0] == doctest::Approx(2.5));
  CHECK_THROWS(b.build().instantiate(ParameterValues{}));
}

TEST_CASE("lp duals follow the standard-form signs") {
  // min 2x + 3y  s.t. x + y >= 4, x <= 3
  ProgramBuilder b;
  const int x = b.add_block("x", 1, 0, kInf);
  const int y = b.add_block("y", 1, 0, kInf);
  b.add_cost(x, 2);
  b.add_cost(y, 3);
  b.add_ge({{x, 1}, {y, 1}}, 4, "demand");
  b.add_le({{x, 1}}, 3, "cap");
  const auto prog = b.build();
  const auto res = solve(prog);
  REQUIRE(res.solution.optimal());
  CHECK(res.solution.x[x] == doctest::Approx(3));
  CHECK(res.solution.x[y] == doctest::Approx(1));
  CHECK(res.solution.objective == doctest::Approx(9));
  CHECK(res.solution.row_dual[0] == doctest::Approx(3));
  CHECK(res.solution.row_dual[1] == doctest::Approx(1));
  REQUIRE(res.report.residuals);
  CHECK(res.report.residuals->max() <= 1e-9);
}

TEST_CASE("qp with a constant reaches the shifted minimum") {
  ProgramBuilder b;
  const int x = b.add_block("x", 1, -5, 5);
  b.add_quadratic(x, x, 1.0);
  b.add_cost(x, -2.0);
  b.add_constant(1.0);
  const auto res = solve(b.build());
  REQUIRE(res.solution.optimal());
  CHECK(res.solution.x[0] == doctest::Approx(1.0));
  CHECK(res.solution.objective == doctest::Approx(0.0));
}

TEST_CASE("infeasible lp is reported and require_optimal throws") {
  ProgramBuilder b;
  const int x = b.add_block("x", 1, 0, 1);
  b.add_ge({{x, 1}}, 2, "impossible");
  const auto res = solve(b.build());
  CHECK(res.solution.status == SolveStatus::kInfeasible);
  CHECK_THROWS_AS(require_optimal(res, "test"), SolveError);
}

TEST_CASE("linearize matches value and gradient at the reference") {
  ProgramBuilder b;
  const int x = b.add_block("x", 2, -10, 10);
  b.add_quadratic(x, x, 2.0);
  b.add_quadratic(x, x + 1, 1.0);
  b.add_quadratic(x + 1, x + 1, 1.0);
  b.add_cost(x + 1, 3.0);
  const auto p = b.build();
  const std::vector<double> ref{1.5, -0.5};
  const auto lin = linearize(p, ref);
  CHECK(lin.is_linear());
  CHECK(lin.objective(ref) == doctest::Approx(p.objective(ref)));
  for (int i = 0; i < 2; ++i) {
    auto xp = ref, xm = ref;
    xp[i] += 1e-6;
    xm[i] -= 1e-6;
    const double g = (p.objective(xp) - p.objective(xm)) / 2e-6;
    CHECK(lin.cost()[i] == doctest::Approx(g).epsilon(1e-6));
  }
}

TEST_CASE("kkt system of a symmetric Cournot duopoly") {
  // Each player: min (c - a) q + q^2 + q * rival on [0, 100].
  const double a = 10.0, c = 1.0;
  auto player = [&] {
    ProgramBuilder b("firm");
    const int q = b.add_block("q", 1, 0, 100);
    b.add_cost(q, c - a);
    b.add_quadratic(q, q, 1.0);
    b.add_cost_param(q, b.param("rival"), 1.0);
    return b.build();
  };
  KktSystemBuilder kb("duopoly");
  const int p0 = kb.add_player("f0", player());
  const int p1 = kb.add_player("f1", player());
  kb.bind(p0, "rival", AffineExpr{{{kb.primal(p1, "q"), 1.0}}, 0.0});
  kb.bind(p1, "rival", AffineExpr{{{kb.primal(p0, "q"), 1.0}}, 0.0});
  KktOptions o;
  o.multiplier_big_m = 1e3;
  const auto sys = kb.build(o);
  const auto res = solve(sys.mip());
  REQUIRE(res.solution.optimal());
  const auto& x = res.solution.x;
  CHECK(x[kb.primal(p0, "q")] == doctest::Approx((a - c) / 3));
  CHECK(x[kb.primal(p1, "q")] == doctest::Approx((a - c) / 3));
  for (int p = 0; p < 2; ++p) CHECK(sys.player_residuals(p, x).max() <= 1e-7);
  CHECK(validate_big_m(sys.mip(), x).empty());
}

TEST_CASE("big-M validation flags a multiplier at its bound") {
  // min -x s.t. x <= 5: the row multiplier is 1.
  ProgramBuilder b("one");
  const int x = b.add_block("x", 1, 0, kInf);
  b.add_cost(x, -1);
  b.add_le({{x, 1}}, 5, "cap");
  KktSystemBuilder kb;
  kb.add_player("p", b.build());
  KktOptions o;
  o.multiplier_big_m = 1.0;
  const auto sys = kb.build(o);
  const auto res = solve(sys.mip());
  REQUIRE(res.solution.optimal());
  const auto flags = validate_big_m(sys.mip(), res.solution.x);
  REQUIRE(flags.size() == 1);
  CHECK_FALSE(flags[0].on_slack);
  CHECK(flags[0].value == doctest::Approx(1.0));
}

TEST_CASE("lp listing prints 12 significant digits, one row per line") {
  ProgramBuilder b("listing");
  const int x = b.add_block("x", 2, 0, 1);
  b.add_cost(x, 1.0 / 3.0);
  b.add_ge({{x, 1.0}, {x + 1, 2.0}}, 1.0, "r0");
  b.add_eq({{x, 1.0}}, 0.5, "r1");
  const std::string lp = to_lp_string(b.build());
  CHECK(lp.find("0.333333333333") != std::string::npos);
  CHECK(lp.find("0.3333333333333") == std::string::npos);
  CHECK(lp.find("r0") != std::string::npos);
  CHECK(lp.find("r1") != std::string::npos);
}

TEST_CASE("backends") {
  CHECK(backend_available("highs"));
  CHECK_FALSE(backend_available("cplex"));
  SolveOptions o;
  o.backend = "cplex";
  ProgramBuilder b;
  b.add_block("x", 1, 0, 1);
  CHECK_THROWS(solve(b.build(), o));
}
