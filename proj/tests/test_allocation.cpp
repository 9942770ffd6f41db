#include <doctest.h>

#include <algorithm>
#include <random>

#include "carbamm/allocation/allocation.hpp"

using namespace carbamm::allocation;

namespace {

// Money in 1e7 CNY; price 100 CNY/t.
AllocationInput table_input(std::array<double, 3> base, std::array<double, 3> rev, double pool) {
  AllocationInput in;
  in.carbon_price = 100.0;
  in.q_all_t = pool * 1e7 / in.carbon_price;
  for (int k = 0; k < 3; ++k) {
    in.baseline[k] = base[k] * 1e7;
    in.revenue[k] = rev[k] * 1e7;
  }
  return in;
}

bool ir_ok(const AllocationInput& in, const std::array<double, 3>& q) {
  for (int k = 0; k < 3; ++k) {
    if (in.revenue[k] + q[k] * in.carbon_price < in.baseline[k] * (1 - 1e-12)) return false;
  }
  return true;
}

struct GridBest {
  double objective = std::numeric_limits<double>::infinity();
  std::array<double, 3> q{};
};

// Exhaustive search over shares on the 2-simplex with step 1e-3.
GridBest grid_search(const AllocationInput& in) {
  GridBest best;
  const int n = 1000;
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; i + j <= n; ++j) {
      const std::array<double, 3> q{in.q_all_t * i / n, in.q_all_t * j / n, in.q_all_t * (n - i - j) / n};
      if (!ir_ok(in, q)) continue;
      const double v = delta_sum(in, q);
      if (v < best.objective) best = {v, q};
    }
  }
  return best;
}

// Largest change of the objective over one grid step.
double step_bound(const AllocationInput& in) {
  double s = 0.0;
  for (double b : in.baseline) s += in.pool() / b;
  return 4.0 * s * 1e-3;
}

}  // namespace

TEST_CASE("symmetric instance equalizes the gains") {
  const auto in = table_input({2.0, 1.0, 1.0}, {2.0, 1.0, 1.0}, 0.4);
  const auto r = allocate_pcam(in);
  REQUIRE(r.feasible);
  CHECK(r.q_t[0] * 100 / 1e7 == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(r.q_t[1] * 100 / 1e7 == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(r.q_t[2] * 100 / 1e7 == doctest::Approx(0.1).epsilon(1e-9));
  for (double d : r.delta_j) CHECK(d == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(r.delta_sum == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
}

TEST_CASE("revenue table with one stakeholder far ahead") {
  const auto in = table_input({2.67, 1.81, 0.11}, {2.53, 1.73, 0.23}, 0.46);
  const auto r = allocate_pcam(in);
  REQUIRE(r.feasible);
  CHECK(r.q_t[0] * 100 / 1e7 == doctest::Approx(0.283).epsilon(2e-3));
  CHECK(r.q_t[1] * 100 / 1e7 == doctest::Approx(0.177).epsilon(3e-3));
  CHECK(r.q_t[2] == doctest::Approx(0.0).scale(1.0));
  CHECK(r.delta_j[0] == doctest::Approx(0.0536).epsilon(0.01));
  CHECK(r.delta_j[1] == doctest::Approx(r.delta_j[0]).epsilon(1e-9));
  CHECK(r.delta_j[2] == doctest::Approx(1.0909).epsilon(1e-3));
  CHECK(r.q_t[0] + r.q_t[1] + r.q_t[2] == doctest::Approx(in.q_all_t).epsilon(1e-12));

  const auto cam1 = allocate_baseline(in, Cam1{kRa});
  CHECK_FALSE(cam1.ir[kRg]);
  CHECK_FALSE(cam1.ir[kHp]);
  CHECK(cam1.ir[kRa]);
  CHECK(cam1.allocated[kRa] / 1e7 == doctest::Approx(0.69));

  const auto cam2 = allocate_baseline(in, Cam2{});
  for (double q : cam2.q_t) CHECK(q * 100 / 1e7 == doctest::Approx(0.46 / 3));
  CHECK(cam2.delta_j[kRg] == doctest::Approx((2.53 + 0.46 / 3 - 2.67) / 2.67));
  CHECK(cam2.delta_j[kRg] > 0);

  CHECK(r.delta_sum <= cam2.delta_sum);
  CHECK(cam2.delta_sum <= cam1.delta_sum);

  const auto g = grid_search(in);
  CHECK(r.delta_sum <= g.objective + 1e-9);
  CHECK(g.objective - r.delta_sum <= step_bound(in));
}

TEST_CASE("no allowance revenue") {
  auto in = table_input({2.0, 1.0, 1.0}, {2.0, 1.0, 1.0}, 0.0);
  auto r = allocate_pcam(in);
  CHECK(r.feasible);
  for (int k = 0; k < 3; ++k) {
    CHECK(r.q_t[k] == 0.0);
    CHECK(r.delta_j[k] == 0.0);
  }
  in.q_all_t = 900.0;
  in.carbon_price = 0.0;
  r = allocate_pcam(in);
  CHECK(r.feasible);
  CHECK(r.q_t[0] + r.q_t[1] + r.q_t[2] == doctest::Approx(900.0));

  in.revenue[kHp] *= 0.9;
  r = allocate_pcam(in);
  CHECK_FALSE(r.feasible);
  CHECK_FALSE(r.message.empty());
}

TEST_CASE("infeasible individual rationality names the worst-off stakeholder") {
  const auto in = table_input({2.0, 1.0, 1.0}, {1.0, 1.0, 1.0}, 0.5);
  const auto r = allocate_pcam(in);
  CHECK_FALSE(r.feasible);
  CHECK(r.message.find("rg") != std::string::npos);
  // Max-min split: all revenue to rg, which still loses a quarter.
  CHECK(r.q_t[kRg] == doctest::Approx(in.q_all_t));
  CHECK(r.delta_j[kRg] == doctest::Approx(-0.25));
}

TEST_CASE("invalid inputs") {
  auto in = table_input({2.0, 1.0, 0.0}, {2.0, 1.0, 1.0}, 0.4);
  CHECK_THROWS_AS(allocate_pcam(in), AllocationError);
  in = table_input({2.0, 1.0, 1.0}, {2.0, 1.0, 1.0}, 0.4);
  in.carbon_price = -1.0;
  CHECK_THROWS_AS(allocate_pcam(in), AllocationError);
  CHECK_THROWS_AS(allocate_baseline(in, Cam2{}), AllocationError);
}

TEST_CASE("random instances against the grid search and the baselines") {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> base(0.1, 3.0), drift(-0.15, 0.3), pool(0.05, 1.0);
  int feasible = 0;
  for (int n = 0; n < 40; ++n) {
    std::array<double, 3> b{}, r{};
    for (int k = 0; k < 3; ++k) {
      b[k] = base(rng);
      r[k] = b[k] * (1 + drift(rng));
    }
    const auto in = table_input(b, r, pool(rng));
    const auto res = allocate_pcam(in);
    CAPTURE(n);
    CHECK(res.q_t[0] + res.q_t[1] + res.q_t[2] == doctest::Approx(in.q_all_t).epsilon(1e-9));
    for (double q : res.q_t) CHECK(q >= 0.0);
    const auto g = grid_search(in);
    if (!res.feasible) {
      CHECK(std::isinf(g.objective));
      continue;
    }
    ++feasible;
    for (double d : res.delta_j) CHECK(d >= -1e-9);
    CHECK(res.delta_sum <= g.objective + 1e-9);
    CHECK(g.objective - res.delta_sum <= step_bound(in));
    CHECK(res.delta_sum <= allocate_baseline(in, Cam2{}).delta_sum + 1e-12);
    for (auto t : {kRg, kHp, kRa}) CHECK(res.delta_sum <= allocate_baseline(in, Cam1{t}).delta_sum + 1e-12);
  }
  CHECK(feasible >= 20);
}

TEST_CASE("ties prefer the largest smallest gain") {
  // rg and hp can be equalized at any level; ra already gains more than
  // the pool can give them, so the objective is flat along a+b.
  const auto in = table_input({1.0, 1.0, 1.0}, {1.0, 1.0, 2.0}, 0.2);
  const auto r = allocate_pcam(in);
  REQUIRE(r.feasible);
  CHECK(r.q_t[kRa] == doctest::Approx(0.0).scale(1.0));
  CHECK(r.delta_j[kRg] == doctest::Approx(0.1));
  CHECK(r.delta_j[kHp] == doctest::Approx(0.1));
}
