#include "carbamm/equilibrium/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>
#include <thread>

#include "carbamm/ir/kkt_system.hpp"
#include "carbamm/models/ga.hpp"
#include "carbamm/models/units.hpp"

namespace carbamm::equilibrium {

namespace {

using Clock = std::chrono::steady_clock;
using market::Mechanism;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string at(const std::string& name, int i) { return name + "[" + std::to_string(i) + "]"; }

// Runs f(0..n-1) on up to `jobs` threads; the first exception is rethrown.
template <class F>
void parallel_for(int n, int jobs, F&& f) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

ir::SolveOptions chain_solver(const scenario::Scenario& sc) {
  ir::SolveOptions o = sc.solver;
  o.lp_method = sc.engine.chain_lp_method;
  return o;
}

ir::Schedule strip(const ir::Schedule& s, const std::string& prefix) {
  ir::Schedule out;
  for (const auto& [name, v] : s) {
    if (name.rfind(prefix, 0) == 0) out.emplace(name.substr(prefix.size()), v);
  }
  return out;
}

std::string week_diagnostic(const scenario::Scenario& sc, int w) {
  const auto& ra = sc.chain.ra;
  const auto& hp = sc.chain.hp;
  const auto& g = sc.grid;
  const double dt = g.step_h;
  double res_mwh = 0.0;
  for (int t = w * g.intervals_per_week; t < (w + 1) * g.intervals_per_week; ++t) {
    res_mwh += (sc.chain.rg.profile.wt_mw[t] + sc.chain.rg.profile.pv_mw[t]) * dt;
  }
  const double min_nh3 = ra.load_min * ra.asy_capacity_tph * g.week_hours();
  const double need_nm3 = min_nh3 / ra.eta_h2a;
  const double ae_mwh = std::min(res_mwh, hp.ae_capacity_mw * hp.load_max * g.week_hours());
  std::ostringstream os;
  os << "minimum synthesis load needs " << need_nm3 << " Nm3 of hydrogen; electrolysis on " << res_mwh
     << " MWh of RES yields at most " << ae_mwh * hp.eta_p2h << " Nm3";
  return os.str();
}

WeekSolution solve_week(const scenario::Scenario& sc, int w, double value) {
  const auto t0 = Clock::now();
  const auto h = models::Horizon::week(sc.grid, w);
  models::ChainOptions opt;
  opt.ammonia_value = {value};
  const auto prog = models::build_chain(sc.chain, h, opt);
  const auto res = ir::solve(prog, chain_solver(sc));
  if (!res.solution.optimal()) {
    const auto kind = res.report.status == ir::SolveStatus::kInfeasible ? EquilibriumError::Kind::kInfeasible
                                                                        : EquilibriumError::Kind::kCertification;
    throw EquilibriumError(kind, "week " + std::to_string(w) + " chain program " +
                                     ir::to_string(res.report.status) + ": " + week_diagnostic(sc, w));
  }
  WeekSolution s;
  s.week = w;
  s.ammonia_value = value;
  s.x = res.solution.x;
  s.row_dual = res.solution.row_dual;
  s.objective = res.solution.objective;
  s.residual = res.report.residuals ? res.report.residuals->max() : 0.0;
  const auto& m = prog.block("ra.M");
  for (int t = 0; t < m.length; ++t) s.yield_t += s.x[m.offset + t] * sc.grid.step_h;
  s.seconds = seconds_since(t0);
  return s;
}

}  // namespace

std::vector<double> WeeklyYield::yield_t() const {
  std::vector<double> y;
  for (const auto& w : weeks) y.push_back(w.yield_t);
  return y;
}

WeekSolution solve_weekly_sp(const scenario::Scenario& sc, int week, double rho_ref) {
  if (!(rho_ref > 0)) throw ir::ModelError("rho_ref must be > 0");
  if (week < 0 || week >= sc.grid.weeks) throw ir::ModelError("week index out of range");
  return solve_week(sc, week, rho_ref);
}

WeeklyYield solve_weekly_sps(const scenario::Scenario& sc, double rho_ref, int jobs) {
  if (!(rho_ref > 0)) throw ir::ModelError("rho_ref must be > 0");
  WeeklyYield y;
  y.rho_ref = rho_ref;
  y.weeks.resize(sc.grid.weeks);
  parallel_for(sc.grid.weeks, jobs, [&](int w) { y.weeks[w] = solve_week(sc, w, rho_ref); });
  return y;
}

std::string to_string(OuterObjective o) {
  switch (o) {
    case OuterObjective::kFeasibility: return "feasibility";
    case OuterObjective::kMaxRaSales: return "max_ra_sales";
    case OuterObjective::kMinRaSales: return "min_ra_sales";
    case OuterObjective::kMaxGaSales: return "max_ga_sales";
    case OuterObjective::kMinGaSales: return "min_ga_sales";
    case OuterObjective::kMaxCarbonPrice: return "max_carbon_price";
    case OuterObjective::kMinCarbonPrice: return "min_carbon_price";
  }
  return "?";
}

OuterProblem outer_problem(const scenario::Scenario& sc, const std::vector<double>& yield_t) {
  OuterProblem p;
  p.grid = sc.grid;
  p.ga = sc.ga;
  p.ra = sc.chain.ra;
  p.yield_t = yield_t;
  p.curve = sc.curve;
  p.carbon = sc.carbon;
  p.multiplier_big_m = sc.engine.multiplier_big_m;
  p.solver = sc.solver;
  return p;
}

double OuterEquilibrium::max_residual() const {
  double r = 0.0;
  for (const auto& p : players) r = std::max(r, p.residuals.max());
  return r;
}

namespace {

struct OuterLayout {
  ir::KktSystem sys;
  std::vector<int> ga;
  std::vector<bool> ga_market;  // GA pays the market carbon price
  int ra = -1;
  int supply = -1;
  int rho = -1;
  double rho_max = 0.0;
};

OuterLayout build_outer(const OuterProblem& p, double big_m, const std::set<int>& elastic) {
  const int W = p.grid.weeks;
  const bool pcim = p.carbon.mechanism == Mechanism::kPcim;
  if (p.carbon.mechanism == Mechanism::kM3) {
    int n = 0;
    for (const auto& g : p.ga) n += g.participates ? 1 : 0;
    if (n > 1) throw ir::ModelError("fixed-price trading supports a single participating GA producer");
  }
  if (p.pinned_q_all_t && !pcim) throw ir::ModelError("a pinned allowance volume needs the pcim mechanism");
  if (p.ra && p.yield_t.size() != static_cast<std::size_t>(W)) {
    throw ir::ModelError("outer problem needs one yield per week");
  }

  OuterLayout L;
  ir::KktSystemBuilder kb("outer");
  double k_emis = 0.0;
  for (const auto& g : p.ga) k_emis = std::max(k_emis, g.emission_t_per_t);
  if (pcim) {
    L.rho_max = 10.0 * p.curve.rho_max / std::max(k_emis, 1e-9) / units::kBulk;
    L.rho = kb.add_variable("rho_ca", 0.0, L.rho_max, "MCNY/kt");
  }
  for (std::size_t i = 0; i < p.ga.size(); ++i) {
    models::GaMarket mk{p.curve, market::ga_carbon_terms(p.carbon, p.ga[i].participates),
                        models::GaResolution::kWeekly};
    L.ga_market.push_back(mk.carbon.price == market::GaCarbonTerms::Price::kMarket);
    L.ga.push_back(kb.add_player("ga" + std::to_string(i), models::build_ga(p.ga[i], p.grid, mk)));
  }
  if (p.ra) L.ra = kb.add_player("ra", models::build_ra_trading(*p.ra, p.grid, p.curve, p.yield_t));
  if (pcim) L.supply = kb.add_player("supply", market::build_carbon_supply(p.carbon, p.pinned_q_all_t));

  for (std::size_t i = 0; i < L.ga.size(); ++i) {
    for (int w = 0; w < W; ++w) {
      ir::AffineExpr rival;
      for (std::size_t j = 0; j < L.ga.size(); ++j) {
        if (j != i) rival.terms.push_back({kb.primal(L.ga[j], "D", w), 1.0});
      }
      if (L.ra >= 0) rival.terms.push_back({kb.primal(L.ra, "D", w), 1.0});
      kb.bind(L.ga[i], at("rival", w), rival);
    }
    if (L.ga_market[i]) kb.bind(L.ga[i], "rho_ca", ir::AffineExpr{{{L.rho, 1.0}}, 0.0});
  }
  if (L.ra >= 0) {
    for (int w = 0; w < W; ++w) {
      ir::AffineExpr rival;
      for (int g : L.ga) rival.terms.push_back({kb.primal(g, "D", w), 1.0});
      kb.bind(L.ra, at("rival", w), rival);
    }
  }
  if (pcim) {
    kb.bind(L.supply, "rho_ca", ir::AffineExpr{{{L.rho, 1.0}}, 0.0});
    std::vector<ir::Term> clear{{kb.primal(L.supply, "q_all"), 1.0}};
    for (std::size_t i = 0; i < L.ga.size(); ++i) {
      if (L.ga_market[i]) clear.push_back({kb.primal(L.ga[i], "q_ga"), -1.0});
    }
    kb.add_row(ir::RowKind::kEqual, clear, 0.0, "carbon_clearing");
  }

  auto sales = [&](int player, double coef) {
    for (int w = 0; w < W; ++w) kb.add_objective(kb.primal(player, "D", w), coef);
  };
  switch (p.objective) {
    case OuterObjective::kFeasibility: break;
    case OuterObjective::kMaxRaSales:
    case OuterObjective::kMinRaSales:
      if (L.ra >= 0) sales(L.ra, p.objective == OuterObjective::kMaxRaSales ? -1.0 : 1.0);
      break;
    case OuterObjective::kMaxGaSales:
    case OuterObjective::kMinGaSales:
      for (int g : L.ga) sales(g, p.objective == OuterObjective::kMaxGaSales ? -1.0 : 1.0);
      break;
    case OuterObjective::kMaxCarbonPrice:
    case OuterObjective::kMinCarbonPrice:
      if (L.rho >= 0) kb.add_objective(L.rho, p.objective == OuterObjective::kMaxCarbonPrice ? -1.0 : 1.0);
      break;
  }

  ir::KktOptions ko;
  ko.multiplier_big_m = big_m;
  ko.elastic_players = elastic;
  L.sys = kb.build(ko);
  return L;
}

std::string infeasibility_attribution(const OuterProblem& p, double big_m) {
  std::set<int> all;
  const int n = static_cast<int>(p.ga.size()) + (p.ra ? 1 : 0) + (p.carbon.mechanism == Mechanism::kPcim ? 1 : 0);
  for (int k = 0; k < n; ++k) all.insert(k);
  OuterLayout L;
  try {
    L = build_outer(p, big_m, all);
  } catch (const std::exception& e) {
    return e.what();
  }
  auto o = p.solver;
  const auto res = ir::solve(L.sys.mip(), o);
  if (!res.solution.optimal()) return "even the relaxed system is " + ir::to_string(res.report.status);
  std::string names;
  for (const auto& pl : L.sys.players()) {
    double e = 0.0;
    for (int c : pl.elastic_cols) e += std::abs(res.solution.x[c]);
    if (e > 1e-7) {
      if (!names.empty()) names += ", ";
      names += pl.name + " (" + std::to_string(e) + ")";
    }
  }
  return names.empty() ? "no single KKT block is at fault (shared rows)" : "KKT blocks needing relaxation: " + names;
}

OuterEquilibrium extract(const OuterProblem& p, const OuterLayout& L, std::vector<double> x) {
  const int W = p.grid.weeks;
  const auto& sys = L.sys;
  OuterEquilibrium out;
  out.x = x;
  for (int c : sys.mip().integers) out.binaries.push_back(static_cast<int>(std::lround(x[c])));

  out.ga_sales_t.assign(p.ga.size(), std::vector<double>(W, 0.0));
  out.ga_purchase_t.assign(p.ga.size(), 0.0);
  out.ga_market_revenue.assign(p.ga.size(), 0.0);
  out.ra_sales_t.assign(W, 0.0);
  out.ast_t.assign(W, 0.0);
  out.ammonia_value.assign(W, 0.0);
  out.yield_t = p.ra ? p.yield_t : std::vector<double>(W, 0.0);
  for (std::size_t i = 0; i < L.ga.size(); ++i) {
    for (int w = 0; w < W; ++w) out.ga_sales_t[i][w] = x[sys.column("ga" + std::to_string(i) + ".D", w)] * units::kBulk;
    out.ga_purchase_t[i] = x[sys.column("ga" + std::to_string(i) + ".q_ga")] * units::kBulk;
  }
  if (L.ra >= 0) {
    const auto sol = sys.player_solution(L.ra, x);
    const auto& prog = sys.players()[L.ra].program;
    for (int w = 0; w < W; ++w) {
      out.ra_sales_t[w] = x[sys.column("ra.D", w)] * units::kBulk;
      out.ast_t[w] = x[sys.column("ra.S", w)] * units::kBulk;
      // Equality dual in MCNY/kt; its negative is the value of one more tonne.
      out.ammonia_value[w] = -sol.row_dual[prog.find_row(at("ast", w))] * units::kMarketMoney / units::kBulk;
    }
    out.ra_market_revenue = -sol.objective * units::kMarketMoney;
  }
  for (int w = 0; w < W; ++w) {
    double total = out.ra_sales_t[w];
    for (const auto& g : out.ga_sales_t) total += g[w];
    out.ammonia_price.push_back(market::inverse_demand(total, 0.0, p.curve));
  }

  const double to_cny_per_t = units::kMarketMoney / units::kBulk;
  switch (p.carbon.mechanism) {
    case Mechanism::kM1: break;
    case Mechanism::kM2:
      for (std::size_t i = 0; i < L.ga.size(); ++i) {
        const auto& prog = sys.players()[L.ga[i]].program;
        const int r = prog.find_row("cap");
        if (r < 0) continue;
        const auto sol = sys.player_solution(L.ga[i], x);
        out.carbon_price = std::max(out.carbon_price, sol.row_dual[r] * to_cny_per_t);
      }
      break;
    case Mechanism::kM3:
      out.carbon_price = p.carbon.fixed_price.value_or(0.0);
      for (double q : out.ga_purchase_t) out.q_all_t += q;
      break;
    case Mechanism::kPcim:
      out.carbon_price = x[L.rho] * to_cny_per_t;
      out.q_all_t = x[sys.column("supply.q_all")] * units::kBulk;
      out.carbon_price_at_bound = x[L.rho] >= 0.999 * L.rho_max;
      break;
  }
  for (std::size_t i = 0; i < L.ga.size(); ++i) {
    out.ga_market_revenue[i] = -sys.player_solution(L.ga[i], x).objective * units::kMarketMoney;
  }
  for (std::size_t k = 0; k < sys.players().size(); ++k) {
    std::string name = sys.players()[k].name;
    for (std::size_t i = 0; i < L.ga.size(); ++i) {
      if (L.ga[i] == static_cast<int>(k)) name = p.ga[i].name;
    }
    out.players.push_back({name, sys.player_residuals(static_cast<int>(k), x)});
  }
  return out;
}

}  // namespace

OuterEquilibrium solve_outer(const OuterProblem& p) {
  const auto t0 = Clock::now();
  p.curve.validate();
  p.carbon.validate();
  double big_m = p.multiplier_big_m;
  for (int attempt = 0; attempt < 3; ++attempt, big_m *= 10.0) {
    const OuterLayout L = build_outer(p, big_m, {});
    const auto res = ir::solve(L.sys.mip(), p.solver);
    if (res.report.status == ir::SolveStatus::kInfeasible) {
      throw EquilibriumError(EquilibriumError::Kind::kInfeasible,
                             "outer equilibrium infeasible; " + infeasibility_attribution(p, big_m));
    }
    if (!res.solution.optimal()) {
      throw EquilibriumError(EquilibriumError::Kind::kCertification,
                             "outer equilibrium solve ended " + ir::to_string(res.report.status));
    }
    std::vector<double> x = res.solution.x;
    // The LP at fixed binaries removes the MIP tolerance from the primal.
    const auto polished = ir::solve_fixed(L.sys.mip(), x, p.solver);
    if (polished.solution.optimal()) x = polished.solution.x;

    auto flags = ir::validate_big_m(L.sys.mip(), x);
    if (!flags.empty() && attempt < 2) continue;
    OuterEquilibrium out = extract(p, L, std::move(x));
    out.big_m_flags = std::move(flags);
    out.multiplier_big_m = big_m;
    out.nodes = res.report.nodes;
    for (const auto& pl : out.players) {
      if (pl.residuals.max() > 1e-6) {
        out.issues.push_back("KKT residual of " + pl.name + " is " + std::to_string(pl.residuals.max()));
      }
    }
    for (const auto& f : out.big_m_flags) out.issues.push_back("big-M reached by " + f.label);
    if (out.carbon_price_at_bound) out.issues.push_back("carbon price at its upper bound");
    out.seconds = seconds_since(t0);
    return out;
  }
  throw EquilibriumError(EquilibriumError::Kind::kCertification, "outer equilibrium did not converge");
}

double Revenues::ga_total() const { return std::accumulate(ga.begin(), ga.end(), 0.0); }

std::vector<WeekSolution> solve_inner(const scenario::Scenario& sc, const std::vector<double>& value, int jobs) {
  if (value.size() != static_cast<std::size_t>(sc.grid.weeks)) {
    throw ir::ModelError("inner stage needs one ammonia value per week");
  }
  std::vector<WeekSolution> out(sc.grid.weeks);
  parallel_for(sc.grid.weeks, jobs, [&](int w) { out[w] = solve_week(sc, w, value[w]); });
  return out;
}

namespace {

// Programs, schedules and parameters of each stakeholder at an equilibrium.
struct Stakeholders {
  std::vector<ir::ConvexProgram> rg, hp;  // per week
  std::vector<std::vector<double>> rg_x, hp_x;
  ir::ConvexProgram ra;
  std::vector<double> ra_x;
  std::vector<ir::ConvexProgram> ga;      // hourly, instantiated
  std::vector<std::vector<double>> ga_x;
  std::optional<ir::ConvexProgram> supply;
  std::vector<double> supply_x;
};

models::ChainPrices week_prices(const models::ChainPrices& all, const models::TimeGrid& g, int w) {
  const auto b = static_cast<std::ptrdiff_t>(w) * g.intervals_per_week;
  const auto e = b + g.intervals_per_week;
  return {{all.e_hp.begin() + b, all.e_hp.begin() + e},
          {all.e_ra.begin() + b, all.e_ra.begin() + e},
          {all.h2.begin() + b, all.h2.begin() + e}};
}

Stakeholders stakeholders(const scenario::Scenario& sc, const EquilibriumResult& r) {
  const auto& g = sc.grid;
  const int W = g.weeks;
  const int tau = g.intervals_per_week;
  Stakeholders s;

  std::vector<ir::Schedule> week_sched(W);
  for (int w = 0; w < W; ++w) {
    const auto h = models::Horizon::week(g, w);
    models::ChainOptions opt;
    opt.ammonia_value = {r.inner[w].ammonia_value};
    week_sched[w] = models::build_chain(sc.chain, h, opt).unpack(r.inner[w].x);
    const auto prices = week_prices(r.prices, g, w);
    s.rg.push_back(models::build_rg(sc.chain.rg, h, prices));
    s.rg_x.push_back(s.rg.back().pack(strip(week_sched[w], "rg.")));
    s.hp.push_back(models::build_hp(sc.chain.hp, h, prices));
    s.hp_x.push_back(s.hp.back().pack(strip(week_sched[w], "hp.")));
  }

  std::vector<double> ga_total(W, 0.0);
  for (const auto& d : r.outer.ga_sales_t) {
    for (int w = 0; w < W; ++w) ga_total[w] += d[w];
  }
  s.ra = models::build_ra(sc.chain.ra, g, r.prices, models::RaMarket{sc.curve, ga_total});
  ir::Schedule ra_sched;
  for (int w = 0; w < W; ++w) {
    for (const auto& [name, v] : strip(week_sched[w], "ra.")) {
      auto& dst = ra_sched[name];
      dst.insert(dst.end(), v.begin(), v.end());
    }
  }
  std::vector<double> ast(W), sales(W);
  for (int w = 0; w < W; ++w) {
    ast[w] = r.outer.ast_t[w] / units::kBulk;
    sales[w] = r.outer.ra_sales_t[w] / units::kBulk;
  }
  ra_sched["ast"] = ast;
  ra_sched["sales"] = sales;
  s.ra_x = s.ra.pack(ra_sched);

  const double rho = r.outer.carbon_price * units::kBulk / units::kMarketMoney;
  for (std::size_t i = 0; i < sc.ga.size(); ++i) {
    const auto terms = market::ga_carbon_terms(r.carbon, sc.ga[i].participates);
    const auto prog =
        models::build_ga(sc.ga[i], g, models::GaMarket{sc.curve, terms, models::GaResolution::kHourly});
    ir::ParameterValues params;
    for (int w = 0; w < W; ++w) {
      double rival = r.outer.ra_sales_t[w];
      for (std::size_t j = 0; j < sc.ga.size(); ++j) {
        if (j != i) rival += r.outer.ga_sales_t[j][w];
      }
      params[at("rival", w)] = rival / units::kBulk;
    }
    if (prog.param_index("rho_ca") >= 0) params["rho_ca"] = rho;
    s.ga.push_back(prog.instantiate(params));
    ir::Schedule x;
    auto& m = x["M"];
    for (int t = 0; t < g.intervals(); ++t) m.push_back(r.outer.ga_sales_t[i][t / tau] / g.week_hours());
    auto& d = x["D"];
    for (int w = 0; w < W; ++w) d.push_back(r.outer.ga_sales_t[i][w] / units::kBulk);
    x["q_ga"] = {r.outer.ga_purchase_t[i] / units::kBulk};
    s.ga_x.push_back(s.ga.back().pack(x));
  }

  if (r.carbon.mechanism == Mechanism::kPcim) {
    s.supply = market::build_carbon_supply(r.carbon).instantiate(ir::ParameterValues{{"rho_ca", rho}});
    s.supply_x = {r.outer.q_all_t / units::kBulk};
  }
  return s;
}

}  // namespace

EquilibriumResult assemble(const scenario::Scenario& sc, const OuterEquilibrium& outer,
                           std::vector<WeekSolution> inner) {
  const auto& g = sc.grid;
  const int W = g.weeks;
  const int tau = g.intervals_per_week;
  const double dt = g.step_h;
  EquilibriumResult r;
  r.scenario = sc.name;
  r.carbon = sc.carbon;
  r.outer = outer;
  r.inner = std::move(inner);
  r.prices = models::ChainPrices::zeros(g.intervals());

  for (int w = 0; w < W; ++w) {
    const auto& s = r.inner[w];
    models::ChainOptions opt;
    opt.ammonia_value = {s.ammonia_value};
    const auto prog = models::build_chain(sc.chain, models::Horizon::week(g, w), opt);
    const int sell_hp = prog.col("rg.sell_hp"), sell_ra = prog.col("rg.sell_ra"), sell_h2 = prog.col("hp.sell_h2");
    for (int t = 0; t < tau; ++t) {
      const int gt = w * tau + t;
      r.prices.e_hp[gt] = s.row_dual[prog.find_row(at("clear_e_hp", t))] * units::kElectricityPrice / dt;
      r.prices.e_ra[gt] = s.row_dual[prog.find_row(at("clear_e_ra", t))] * units::kElectricityPrice / dt;
      r.prices.h2[gt] = s.row_dual[prog.find_row(at("clear_h2", t))] * units::kHydrogenPrice / dt;
      const double trade = std::abs(s.x[sell_hp + t]) + std::abs(s.x[sell_ra + t]) + std::abs(s.x[sell_h2 + t]);
      if (trade < 1e-9) r.degenerate_intervals.push_back(gt);
    }
    r.green_yield_t += s.yield_t;
    r.inner_residual = std::max(r.inner_residual, s.residual);
    if (W == static_cast<int>(outer.yield_t.size())) {
      const double ref = std::max(outer.yield_t[w], 1.0);
      r.yield_mismatch = std::max(r.yield_mismatch, std::abs(s.yield_t - outer.yield_t[w]) / ref);
    }
  }

  const Stakeholders st = stakeholders(sc, r);
  for (int w = 0; w < W; ++w) {
    r.revenues.rg -= st.rg[w].objective(st.rg_x[w]) * units::kMoney;
    r.revenues.hp -= st.hp[w].objective(st.hp_x[w]) * units::kMoney;
  }
  r.revenues.ra = -st.ra.objective(st.ra_x) * units::kMoney;
  for (std::size_t i = 0; i < st.ga.size(); ++i) {
    r.revenues.ga.push_back(-st.ga[i].objective(st.ga_x[i]) * units::kMarketMoney);
  }
  if (sc.carbon.mechanism == Mechanism::kPcim || sc.carbon.mechanism == Mechanism::kM3) {
    r.revenues.carbon = outer.carbon_price * outer.q_all_t;
  }

  const double hours = g.intervals() * dt;
  for (std::size_t i = 0; i < sc.ga.size(); ++i) {
    const double d = std::accumulate(outer.ga_sales_t[i].begin(), outer.ga_sales_t[i].end(), 0.0);
    r.gray_yield_t += d;
    r.emissions_t += sc.ga[i].emission_t_per_t * d;
    r.ga_utilization.push_back(d / (sc.ga[i].capacity_tph * hours));
  }
  r.ra_utilization = r.green_yield_t / (sc.chain.ra.asy_capacity_tph * hours);
  r.average_ammonia_price =
      std::accumulate(outer.ammonia_price.begin(), outer.ammonia_price.end(), 0.0) / std::max(W, 1);

  r.issues = outer.issues;
  if (r.inner_residual > 1e-6) r.issues.push_back("inner KKT residual " + std::to_string(r.inner_residual));
  return r;
}

Pipeline::Pipeline(scenario::Scenario sc) : scenario_(std::move(sc)) { scenario_.validate(); }

const WeeklyYield& Pipeline::yields() {
  std::lock_guard lock(mutex_);
  if (!yields_) {
    const auto t0 = Clock::now();
    yields_ = solve_weekly_sps(scenario_, scenario_.engine.rho_ref, scenario_.engine.jobs);
    sp_seconds_ = seconds_since(t0);
    // The reference solves double as inner solutions at a flat value.
    inner_cache_.emplace_back(std::vector<double>(scenario_.grid.weeks, scenario_.engine.rho_ref), yields_->weeks);
  }
  return *yields_;
}

void Pipeline::set_market(std::vector<models::GaParams> ga, const market::CarbonLedger& carbon) {
  scenario::Scenario next = scenario_;
  next.ga = std::move(ga);
  next.carbon = carbon;
  next.validate();
  std::lock_guard lock(mutex_);
  scenario_ = std::move(next);
}

std::vector<WeekSolution> Pipeline::inner(const std::vector<double>& value) {
  {
    std::lock_guard lock(mutex_);
    for (const auto& [key, sol] : inner_cache_) {
      bool same = key.size() == value.size();
      for (std::size_t w = 0; same && w < key.size(); ++w) {
        same = std::abs(key[w] - value[w]) <= 1e-9 * std::max(1.0, std::abs(value[w]));
      }
      if (same) return sol;
    }
  }
  auto sol = solve_inner(scenario_, value, scenario_.engine.jobs);
  std::lock_guard lock(mutex_);
  inner_cache_.emplace_back(value, sol);
  return sol;
}

EquilibriumResult Pipeline::solve(const RunOptions& o) { return solve(scenario_.carbon, o); }

EquilibriumResult Pipeline::solve(const market::CarbonLedger& carbon, const RunOptions& o) {
  scenario::Scenario sc = scenario_;
  sc.carbon = carbon;
  sc.carbon.validate();
  std::vector<double> y = yields().yield_t();
  const double sp_s = sp_seconds_;

  OuterEquilibrium outer;
  std::vector<WeekSolution> in;
  double outer_s = 0.0, inner_s = 0.0;
  int it = 0;
  for (; it < sc.engine.max_fixed_point; ++it) {
    OuterProblem p = outer_problem(sc, y);
    p.pinned_q_all_t = o.pinned_q_all_t;
    p.objective = o.objective;
    const auto t0 = Clock::now();
    outer = solve_outer(p);
    outer_s += seconds_since(t0);
    const auto t1 = Clock::now();
    in = inner(outer.ammonia_value);
    inner_s += seconds_since(t1);
    double gap = 0.0;
    for (int w = 0; w < sc.grid.weeks; ++w) {
      gap = std::max(gap, std::abs(in[w].yield_t - y[w]) / std::max(y[w], 1.0));
    }
    if (gap <= 1e-7) break;
    for (int w = 0; w < sc.grid.weeks; ++w) y[w] = in[w].yield_t;
  }
  EquilibriumResult r = assemble(sc, outer, std::move(in));
  r.fixed_point_iterations = std::min(it + 1, sc.engine.max_fixed_point);
  if (r.yield_mismatch > 1e-7) {
    r.issues.push_back("inner yields differ from the outer yields by " + std::to_string(r.yield_mismatch));
  }
  r.timings.sp = sp_s;
  r.timings.outer = outer_s;
  r.timings.inner = inner_s;
  return r;
}

EquilibriumResult solve_equilibrium(const scenario::Scenario& sc, const RunOptions& o) {
  Pipeline p(sc);
  return p.solve(o);
}

double DeviationReport::max_improvement() const {
  double m = grid_improvement;
  for (const auto& d : deviations) m = std::max(m, d.improvement);
  return m;
}

namespace {

// Objective at x and the optimum of the tangent LP, both in program units.
std::pair<double, double> best_response(const ir::ConvexProgram& prog, const std::vector<double>& x,
                                        const ir::SolveOptions& o) {
  const double f = prog.objective(x);
  const auto lin = prog.is_linear() ? prog : ir::linearize(prog, x);
  const auto res = ir::solve(lin, o);
  if (!res.solution.optimal()) return {f, -ir::kInf};
  return {f, lin.objective(res.solution.x)};
}

Deviation deviation(std::string name, double f, double best, double scale) {
  Deviation d;
  d.stakeholder = std::move(name);
  d.objective = -f * scale;
  d.best = -best * scale;
  d.improvement = std::max(0.0, f - best) / std::max(std::abs(f), 1.0);
  return d;
}

}  // namespace

DeviationReport verify_equilibrium(const EquilibriumResult& r, const scenario::Scenario& sc, int grid_points) {
  DeviationReport rep;
  const auto o = chain_solver(sc);
  const Stakeholders st = stakeholders(sc, r);
  const int W = sc.grid.weeks;

  auto weekly = [&](const std::string& name, const std::vector<ir::ConvexProgram>& progs,
                    const std::vector<std::vector<double>>& xs) {
    double f = 0.0, best = 0.0;
    for (int w = 0; w < W; ++w) {
      const auto [fw, bw] = best_response(progs[w], xs[w], o);
      f += fw;
      best += bw;
    }
    rep.deviations.push_back(deviation(name, f, best, units::kMoney));
  };
  weekly("rg", st.rg, st.rg_x);
  weekly("hp", st.hp, st.hp_x);
  {
    const auto [f, best] = best_response(st.ra, st.ra_x, o);
    rep.deviations.push_back(deviation("ra", f, best, units::kMoney));
  }
  for (std::size_t i = 0; i < st.ga.size(); ++i) {
    const auto [f, best] = best_response(st.ga[i], st.ga_x[i], o);
    rep.deviations.push_back(deviation(sc.ga[i].name, f, best, units::kMarketMoney));
  }
  if (st.supply) {
    const auto [f, best] = best_response(*st.supply, st.supply_x, o);
    rep.deviations.push_back(deviation("carbon_supply", f, best, units::kMarketMoney));
  }

  // One-dimensional scans of each GA's weekly sales with purchases following
  // the cap.
  const double rho = r.outer.carbon_price * units::kBulk / units::kMarketMoney;
  for (std::size_t i = 0; i < sc.ga.size(); ++i) {
    const auto terms = market::ga_carbon_terms(r.carbon, sc.ga[i].participates);
    const auto base = models::build_ga(sc.ga[i], sc.grid, models::GaMarket{sc.curve, terms, models::GaResolution::kWeekly});
    ir::ParameterValues params;
    for (int w = 0; w < W; ++w) {
      double rival = r.outer.ra_sales_t[w];
      for (std::size_t j = 0; j < sc.ga.size(); ++j) {
        if (j != i) rival += r.outer.ga_sales_t[j][w];
      }
      params[at("rival", w)] = rival / units::kBulk;
    }
    if (base.param_index("rho_ca") >= 0) params["rho_ca"] = rho;
    const auto prog = base.instantiate(params);
    ir::Schedule s;
    for (int w = 0; w < W; ++w) s["D"].push_back(r.outer.ga_sales_t[i][w] / units::kBulk);
    s["q_ga"] = {r.outer.ga_purchase_t[i] / units::kBulk};
    const auto x0 = prog.pack(s);
    const double f0 = prog.objective(x0);
    const int q = prog.col("q_ga");
    const int cap = prog.find_row("cap");
    for (int w = 0; w < W; ++w) {
      const int d = prog.col("D", w);
      const double lo = prog.lower()[d], hi = prog.upper()[d];
      for (int k = 0; k < grid_points; ++k) {
        auto x = x0;
        x[d] = lo + (hi - lo) * k / std::max(grid_points - 1, 1);
        if (cap >= 0) {
          // Cap row is stored as allowance - emissions + q >= 0.
          const double slack = prog.row_activity(cap, x) - prog.rhs(cap);
          x[q] = std::clamp(x[q] - slack, prog.lower()[q], prog.upper()[q]);
        }
        if (ir::max_violation(prog, x) > 1e-9) continue;
        const double gain = (f0 - prog.objective(x)) / std::max(std::abs(f0), 1.0);
        rep.grid_improvement = std::max(rep.grid_improvement, gain);
      }
    }
  }
  return rep;
}

AllowanceSplitReport allowance_split_check(const EquilibriumResult& r, const scenario::Scenario& sc) {
  AllowanceSplitReport rep;
  const auto o = chain_solver(sc);
  const double pool = sc.carbon.q_rewa_t / units::kBulk;
  const double price = r.outer.carbon_price * units::kBulk / units::kMoney;  // chain money per kt

  models::ChainOptions opt;
  opt.ammonia_value = {r.inner.empty() ? sc.engine.rho_ref : r.inner[0].ammonia_value};
  ir::ProgramBuilder b(models::build_chain(sc.chain, models::Horizon::week(sc.grid, 0), opt));
  const int q0 = b.add_block("q_rg", 1, 0.0, pool, "kt");
  b.add_block("q_hp", 1, 0.0, pool, "kt");
  b.add_block("q_ra", 1, 0.0, pool, "kt");
  b.add_le({{q0, 1.0}, {q0 + 1, 1.0}, {q0 + 2, 1.0}}, pool, "allowance_pool");
  for (int k = 0; k < 3; ++k) b.add_cost(q0 + k, -price);
  const auto primary = b.build();
  const ir::Solution first = ir::require_optimal(ir::solve(primary, o), "allowance split");
  const double opt_value = first.objective - primary.cost_constant();

  const std::array<std::string, 3> names{"max q_rg", "max q_hp", "max q_ra"};
  for (int k = 0; k < 3; ++k) {
    ir::ProgramBuilder t(primary);
    std::vector<ir::Term> obj;
    for (int j = 0; j < primary.num_cols(); ++j) {
      const double c = primary.cost()[j];
      if (c == 0.0) continue;
      obj.push_back({j, c});
      t.add_cost(j, -c);
    }
    t.add_le(std::move(obj), opt_value + 1e-9 * std::max(1.0, std::abs(opt_value)), "optimal_value");
    t.add_cost(q0 + k, -1.0);
    const auto prog = t.build();
    const ir::Solution sol = ir::require_optimal(ir::solve(prog, o), "allowance tie-break");
    std::array<double, 3> split{};
    for (int j = 0; j < 3; ++j) split[j] = sol.x[q0 + j] * units::kBulk;
    rep.objectives.push_back(names[k]);
    rep.splits.push_back(split);
    rep.q_all_t.push_back(split[0] + split[1] + split[2]);
  }
  const auto [lo, hi] = std::minmax_element(rep.q_all_t.begin(), rep.q_all_t.end());
  rep.spread = (*hi - *lo) / std::max(sc.carbon.q_rewa_t, 1.0);
  for (std::size_t a = 0; a < rep.splits.size(); ++a) {
    for (std::size_t c = a + 1; c < rep.splits.size(); ++c) {
      double diff = 0.0;
      for (int j = 0; j < 3; ++j) diff += std::abs(rep.splits[a][j] - rep.splits[c][j]);
      if (diff > 1e-6 * std::max(sc.carbon.q_rewa_t, 1.0)) rep.distinct_splits = true;
    }
  }
  return rep;
}

StabilityReport stability_check(const scenario::Scenario& sc, const std::vector<double>& yield_t,
                                const std::optional<double>& pinned) {
  StabilityReport rep;
  const OuterObjective all[] = {OuterObjective::kFeasibility,   OuterObjective::kMaxRaSales,
                                OuterObjective::kMinRaSales,    OuterObjective::kMaxGaSales,
                                OuterObjective::kMinGaSales,    OuterObjective::kMaxCarbonPrice,
                                OuterObjective::kMinCarbonPrice};
  std::optional<OuterEquilibrium> ref;
  for (auto objective : all) {
    OuterProblem p = outer_problem(sc, yield_t);
    p.pinned_q_all_t = pinned;
    p.objective = objective;
    const auto e = solve_outer(p);
    StabilityRow row;
    row.objective = objective;
    row.rep2a_market = e.ra_market_revenue;
    row.ga = e.ga_market_revenue;
    row.carbon = e.carbon_price * e.q_all_t;
    if (!ref) ref = e;
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1.0); };
    double change = std::max(rel(e.ra_market_revenue, ref->ra_market_revenue),
                             rel(row.carbon, ref->carbon_price * ref->q_all_t));
    for (std::size_t i = 0; i < row.ga.size(); ++i) change = std::max(change, rel(row.ga[i], ref->ga_market_revenue[i]));
    for (std::size_t w = 0; w < e.ammonia_value.size(); ++w) {
      row.max_value_gap = std::max(row.max_value_gap, std::abs(e.ammonia_value[w] - ref->ammonia_value[w]));
    }
    rep.max_relative_change = std::max(rep.max_relative_change, change);
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

}  // namespace carbamm::equilibrium
