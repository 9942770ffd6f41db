#include "carbamm/allocation/allocation.hpp"

#include <algorithm>
#include <cmath>

#include "carbamm/ir/solver.hpp"

namespace carbamm::allocation {

void AllocationInput::validate() const {
  if (!(q_all_t >= 0)) throw AllocationError("traded volume must be >= 0");
  if (!(carbon_price >= 0)) throw AllocationError("carbon price must be >= 0");
  for (int k = 0; k < 3; ++k) {
    if (!(baseline[k] > 0)) {
      throw AllocationError(std::string("baseline revenue of ") + kStakeholderNames[k] + " must be > 0");
    }
    if (!std::isfinite(revenue[k])) throw AllocationError("revenues must be finite");
  }
}

AllocationInput allocation_input(const equilibrium::EquilibriumResult& trading,
                                 const equilibrium::EquilibriumResult& base) {
  AllocationInput in;
  in.q_all_t = trading.outer.q_all_t;
  in.carbon_price = trading.outer.carbon_price;
  in.baseline = {base.revenues.rg, base.revenues.hp, base.revenues.ra};
  in.revenue = {trading.revenues.rg, trading.revenues.hp, trading.revenues.ra};
  return in;
}

namespace {

AllocationResult evaluate(const AllocationInput& in, std::string scheme, const std::array<double, 3>& q) {
  AllocationResult r;
  r.scheme = std::move(scheme);
  r.q_t = q;
  for (int k = 0; k < 3; ++k) {
    r.allocated[k] = in.revenue[k] + q[k] * in.carbon_price;
    r.delta_j[k] = (r.allocated[k] - in.baseline[k]) / in.baseline[k];
    r.ir[k] = r.delta_j[k] >= -1e-9;
  }
  r.delta_sum = delta_sum(in, q);
  return r;
}

// Columns: shares f (3), pairwise gaps e (3), floor t (1). The split is
// f * q_all, so a zero carbon price still yields a complete split.
struct Lp {
  ir::ProgramBuilder b{"pcam"};
  int f = 0, e = 0, t = 0;
  std::array<std::vector<ir::Term>, 3> dj;  // delta_j = terms + constant
  std::array<double, 3> dj0{};
};

Lp make_lp(const AllocationInput& in) {
  Lp lp;
  auto& b = lp.b;
  lp.f = b.add_block("share", 3, 0.0, 1.0);
  lp.e = b.add_block("gap", 3, 0.0, ir::kInf);
  lp.t = b.add_block("floor", 1, -ir::kInf, ir::kInf);
  b.add_eq({{lp.f, 1.0}, {lp.f + 1, 1.0}, {lp.f + 2, 1.0}}, 1.0, "budget");
  for (int k = 0; k < 3; ++k) {
    lp.dj[k] = {{lp.f + k, in.pool() / in.baseline[k]}};
    lp.dj0[k] = (in.revenue[k] - in.baseline[k]) / in.baseline[k];
  }
  const int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
  for (int p = 0; p < 3; ++p) {
    const int i = pairs[p][0], k = pairs[p][1];
    const double c = lp.dj0[i] - lp.dj0[k];
    const double ai = lp.dj[i][0].coef, ak = lp.dj[k][0].coef;
    b.add_ge({{lp.e + p, 1.0}, {lp.f + i, -ai}, {lp.f + k, ak}}, c, "gap+" + std::to_string(p));
    b.add_ge({{lp.e + p, 1.0}, {lp.f + i, ai}, {lp.f + k, -ak}}, -c, "gap-" + std::to_string(p));
  }
  for (int k = 0; k < 3; ++k) {
    b.add_ge({{lp.f + k, lp.dj[k][0].coef}, {lp.t, -1.0}}, -lp.dj0[k], std::string("floor_") + kStakeholderNames[k]);
  }
  return lp;
}

std::array<double, 3> split(const AllocationInput& in, const Lp& lp, const std::vector<double>& x) {
  std::array<double, 3> q{};
  for (int k = 0; k < 3; ++k) q[k] = std::clamp(x[lp.f + k], 0.0, 1.0) * in.q_all_t;
  const double s = q[0] + q[1] + q[2];
  if (s > 0) {
    for (auto& v : q) v *= in.q_all_t / s;
  }
  return q;
}

ir::SolveOptions tight() {
  ir::SolveOptions o;
  o.feasibility_tol = 1e-10;
  o.optimality_tol = 1e-10;
  return o;
}

}  // namespace

double delta_sum(const AllocationInput& in, const std::array<double, 3>& q) {
  std::array<double, 3> dj{};
  for (int k = 0; k < 3; ++k) dj[k] = (in.revenue[k] + q[k] * in.carbon_price - in.baseline[k]) / in.baseline[k];
  return std::abs(dj[0] - dj[1]) + std::abs(dj[0] - dj[2]) + std::abs(dj[1] - dj[2]);
}

AllocationResult allocate_pcam(const AllocationInput& in) {
  in.validate();
  if (in.pool() == 0.0) {
    // Any split is worth nothing, so the even one is returned.
    const double third = in.q_all_t / 3.0;
    auto r = evaluate(in, "pcam", {third, third, third});
    r.feasible = r.ir[0] && r.ir[1] && r.ir[2];
    if (!r.feasible) r.message = "no allowance revenue to restore individual rationality";
    return r;
  }
  // Individual rationality: every gain nonnegative.
  double shortfall = 0.0;
  for (int k = 0; k < 3; ++k) shortfall += std::max(0.0, in.baseline[k] - in.revenue[k]);
  const bool feasible = shortfall <= in.pool() * (1 + 1e-12) + 1e-9;

  if (!feasible) {
    Lp lp = make_lp(in);
    lp.b.add_cost(lp.t, -1.0);
    const ir::Solution sol = ir::require_optimal(ir::solve(lp.b.build(), tight()), "pcam max-min split");
    auto r = evaluate(in, "pcam", split(in, lp, sol.x));
    r.feasible = false;
    int worst = 0;
    for (int k = 1; k < 3; ++k) {
      if (r.delta_j[k] < r.delta_j[worst]) worst = k;
    }
    r.message = std::string("individual rationality cannot hold: ") + kStakeholderNames[worst] + " loses " +
                std::to_string(-r.delta_j[worst] * 100.0) + "% at best";
    return r;
  }

  Lp lp = make_lp(in);
  lp.b.set_bounds(lp.t, 0.0, ir::kInf);
  for (int p = 0; p < 3; ++p) lp.b.add_cost(lp.e + p, 1.0);
  const auto first_prog = lp.b.build();
  const ir::Solution first = ir::require_optimal(ir::solve(first_prog, tight()), "pcam");
  const double best = first.objective;

  Lp tb = make_lp(in);
  tb.b.set_bounds(tb.t, 0.0, ir::kInf);
  tb.b.add_le({{tb.e, 1.0}, {tb.e + 1, 1.0}, {tb.e + 2, 1.0}}, best + 1e-10, "optimal_gap");
  tb.b.add_cost(tb.t, -1.0);
  const auto second = ir::solve(tb.b.build(), tight());
  const auto& x = second.solution.optimal() ? second.solution.x : first.x;
  auto r = evaluate(in, "pcam", split(in, lp, x));
  r.feasible = true;
  return r;
}

AllocationResult allocate_baseline(const AllocationInput& in, Cam1 scheme) {
  in.validate();
  std::array<double, 3> q{};
  q[scheme.target] = in.q_all_t;
  return evaluate(in, std::string("cam1:") + kStakeholderNames[scheme.target], q);
}

AllocationResult allocate_baseline(const AllocationInput& in, Cam2) {
  in.validate();
  const double third = in.q_all_t / 3.0;
  return evaluate(in, "cam2", {third, third, third});
}

bool PerturbationReport::all_nondecreasing() const {
  return std::all_of(nondecreasing.begin(), nondecreasing.end(), [](bool b) { return b; });
}

PerturbationReport perturb_ir(equilibrium::Pipeline& pipeline, const std::vector<double>& volumes,
                              const equilibrium::EquilibriumResult& baseline) {
  const auto& sc = pipeline.scenario();
  if (sc.carbon.mechanism != market::Mechanism::kPcim) {
    throw AllocationError("perturbation needs a pcim scenario");
  }
  // Volumes are usually quoted in whole 1e3 t, so a request up to half a
  // unit above q_rewa means "everything" and is applied as q_rewa.
  const double q_rewa = sc.carbon.q_rewa_t;
  for (double v : volumes) {
    if (!(v >= 0) || v > q_rewa + kVolumeRounding) {
      throw AllocationError("volume " + std::to_string(v) + " t outside [0, q_rewa = " + std::to_string(q_rewa) + "]");
    }
  }
  std::vector<double> sorted = volumes;
  std::sort(sorted.begin(), sorted.end());
  PerturbationReport rep;
  for (double v : sorted) {
    PerturbationRow row;
    row.volume_t = v;
    row.applied_t = std::min(v, q_rewa);
    try {
      equilibrium::RunOptions o;
      o.pinned_q_all_t = row.applied_t;
      const auto r = pipeline.solve(o);
      row.carbon_price = r.outer.carbon_price;
      row.rep2a_total = r.revenues.rep2a();
      row.allocation = allocate_pcam(allocation_input(r, baseline));
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rep.rows.push_back(std::move(row));
  }
  rep.nondecreasing.fill(true);
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    const auto& a = rep.rows[i - 1];
    const auto& b = rep.rows[i];
    if (!a.error.empty() || !b.error.empty()) {
      rep.nondecreasing.fill(false);
      continue;
    }
    auto ok = [](double lo, double hi) { return hi >= lo - 1e-9 * std::max(1.0, std::abs(lo)); };
    rep.nondecreasing[0] = rep.nondecreasing[0] && ok(a.rep2a_total, b.rep2a_total);
    for (int k = 0; k < 3; ++k) {
      rep.nondecreasing[k + 1] = rep.nondecreasing[k + 1] && ok(a.allocation.allocated[k], b.allocation.allocated[k]);
    }
  }
  return rep;
}

}  // namespace carbamm::allocation
