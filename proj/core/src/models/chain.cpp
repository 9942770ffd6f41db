#include "carbamm/models/chain.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "carbamm/models/cone.hpp"
#include "carbamm/models/units.hpp"

namespace carbamm::models {

using ir::kInf;
using ir::ProgramBuilder;
using ir::Term;

namespace {

const double kSqrt2 = std::numbers::sqrt2;

std::string at(const std::string& s, int t) { return s + "[" + std::to_string(t) + "]"; }

struct Storage {
  int in = -1;
  int out = -1;
  int soc = -1;
};

// soc_t = (1 - loss) soc_prev + (eta_in in_t - out_t / eta_out) dt, cyclic in the week.
Storage add_storage(ProgramBuilder& b, const std::string& name, const Horizon& h, double cap,
                    double soc_min, double soc_max, double rate, double eta_in, double eta_out,
                    double loss, const std::string& unit) {
  const int T = h.intervals();
  const double dt = h.dt();
  Storage s;
  s.in = b.add_block(name + ".in", T, 0.0, rate * cap, unit);
  s.out = b.add_block(name + ".out", T, 0.0, rate * cap, unit);
  s.soc = b.add_block(name + ".soc", T, soc_min * cap, soc_max * cap, unit + "h");
  for (int t = 0; t < T; ++t) {
    b.add_eq({{s.soc + t, 1.0},
              {s.soc + h.prev_in_week(t), -(1.0 - loss)},
              {s.in + t, -eta_in * dt},
              {s.out + t, dt / eta_out}},
             0.0, at(name + ".balance", t));
  }
  return s;
}

struct Bes {
  Storage st;
  int q = -1;
};

Bes add_bes(ProgramBuilder& b, const std::string& name, const BesParams& p, const Horizon& h) {
  const double W = p.capacity_mwh / units::kPower;
  Bes bes;
  bes.st = add_storage(b, name, h, W, p.soc_min, p.soc_max, 0.5, p.eta_charge, p.eta_discharge,
                       p.self_discharge, "100MW");
  const int T = h.intervals();
  bes.q = b.add_block(name + ".q", T, -W, W, "100Mvar");
  for (int t = 0; t < T; ++t) {
    for (int c : {bes.st.in + t, bes.st.out + t}) {
      b.add_le({{c, 1.0}, {bes.q + t, 1.0}}, kSqrt2 * W, at(name + ".apparent+", t));
      b.add_le({{c, 1.0}, {bes.q + t, -1.0}}, kSqrt2 * W, at(name + ".apparent-", t));
    }
    b.add_cost(bes.st.out + t, p.degradation_cny_per_mwh * units::kPower / units::kMoney * h.dt());
  }
  return bes;
}

struct RgCols {
  int sell_hp = -1;
  int sell_ra = -1;
};

RgCols add_rg(ProgramBuilder& b, const RgParams& rg, const Horizon& h, const std::string& pre) {
  const int T = h.intervals();
  const int n = static_cast<int>(rg.network.buses.size());
  const int nb = static_cast<int>(rg.network.branches.size());

  // Renewable units: active power below availability, reactive power in a rotated box.
  struct UnitCols {
    int bus;
    int p;
    int q;
  };
  std::vector<UnitCols> units_cols;
  auto add_units = [&](const std::vector<RenewableUnit>& list, const std::vector<double>& avail_mw,
                       double total_mw, const std::string& kind) {
    for (std::size_t u = 0; u < list.size(); ++u) {
      const double W = list[u].capacity_mw / units::kPower;
      const double share = total_mw > 0 ? list[u].capacity_mw / total_mw : 0.0;
      std::vector<double> lo(T, 0.0), hi(T);
      for (int t = 0; t < T; ++t) hi[t] = avail_mw[h.global(t)] * share / units::kPower;
      const std::string nm = pre + kind + std::to_string(u);
      const int p = b.add_block(nm + ".p", lo, hi, "100MW");
      const int q = b.add_block(nm + ".q", T, -W, W, "100Mvar");
      for (int t = 0; t < T; ++t) {
        b.add_le({{p + t, 1.0}, {q + t, 1.0}}, kSqrt2 * W, at(nm + ".apparent+", t));
        b.add_le({{p + t, 1.0}, {q + t, -1.0}}, kSqrt2 * W, at(nm + ".apparent-", t));
      }
      units_cols.push_back({list[u].bus, p, q});
    }
  };
  add_units(rg.wt, rg.profile.wt_mw, rg.wt_capacity(), "wt");
  add_units(rg.pv, rg.profile.pv_mw, rg.pv_capacity(), "pv");

  const Bes bes = add_bes(b, pre + "bes", rg.bes, h);

  std::vector<double> vlo(n * T), vhi(n * T);
  for (int j = 0; j < n; ++j) {
    for (int t = 0; t < T; ++t) {
      vlo[j * T + t] = rg.network.buses[j].v_min;
      vhi[j * T + t] = rg.network.buses[j].v_max;
    }
  }
  const int v = b.add_block(pre + "v", vlo, vhi, "pu2");
  const int lp = nb ? b.add_block(pre + "line.p", nb * T, -kInf, kInf, "100MW") : -1;
  const int lq = nb ? b.add_block(pre + "line.q", nb * T, -kInf, kInf, "100Mvar") : -1;
  const double vc = rg.reactive_compensation ? rg.vc_max_mvar / units::kPower : 0.0;
  const int qvc = rg.reactive_compensation ? b.add_block(pre + "vc", n * T, -vc, vc, "100Mvar") : -1;

  RgCols out;
  out.sell_hp = b.add_block(pre + "sell_hp", T, 0.0, kInf, "100MW");
  out.sell_ra = b.add_block(pre + "sell_ra", T, 0.0, kInf, "100MW");

  for (int t = 0; t < T; ++t) {
    std::vector<std::vector<Term>> pbal(n), qbal(n);
    for (int e = 0; e < nb; ++e) {
      const auto& br = rg.network.branches[e];
      pbal[br.from].push_back({lp + e * T + t, 1.0});
      pbal[br.to].push_back({lp + e * T + t, -1.0});
      qbal[br.from].push_back({lq + e * T + t, 1.0});
      qbal[br.to].push_back({lq + e * T + t, -1.0});
      b.add_eq({{v + br.to * T + t, 1.0},
                {v + br.from * T + t, -1.0},
                {lp + e * T + t, 2.0 * br.r},
                {lq + e * T + t, 2.0 * br.x}},
               0.0, at(pre + "voltage" + std::to_string(e), t));
    }
    for (const auto& u : units_cols) {
      pbal[u.bus].push_back({u.p + t, -1.0});
      qbal[u.bus].push_back({u.q + t, -1.0});
    }
    pbal[rg.bes_bus].push_back({bes.st.out + t, -1.0});
    pbal[rg.bes_bus].push_back({bes.st.in + t, 1.0});
    qbal[rg.bes_bus].push_back({bes.q + t, -1.0});
    pbal[rg.hp_bus].push_back({out.sell_hp + t, 1.0});
    pbal[rg.ra_bus].push_back({out.sell_ra + t, 1.0});
    for (int j = 0; j < n; ++j) {
      if (qvc >= 0) qbal[j].push_back({qvc + j * T + t, -1.0});
      b.add_eq(std::move(pbal[j]), 0.0, at(pre + "pbal" + std::to_string(j), t));
      b.add_eq(std::move(qbal[j]), 0.0, at(pre + "qbal" + std::to_string(j), t));
    }
  }
  return out;
}

struct HpCols {
  int buy_e = -1;
  int sell_h2 = -1;
};

HpCols add_hp(ProgramBuilder& b, const HpParams& hp, const Horizon& h, const std::string& pre) {
  const int T = h.intervals();
  const double dt = h.dt();
  const auto& net = hp.pipeline;
  const int N = static_cast<int>(net.nodes.size());
  const int E = static_cast<int>(net.pipes.size());
  const int Z = net.depth;

  HpCols out;
  out.buy_e = b.add_block(pre + "buy_e", T, 0.0, kInf, "100MW");
  const double W = hp.ae_capacity_mw / units::kPower;
  const int ae = b.add_block(pre + "ae", T, hp.load_min * W, hp.load_max * W, "100MW");
  const int pro = b.add_block(pre + "h2_pro", T, 0.0, kInf, "1e4Nm3/h");
  const int comp = b.add_block(pre + "comp", T, 0.0, kInf, "100MW");
  const Bes bes = add_bes(b, pre + "bes", hp.bes, h);
  const double hcap = hp.hst.capacity / units::kHydrogen;
  const Storage hst = add_storage(b, pre + "hst", h, hcap, hp.hst.soc_min, hp.hst.soc_max,
                                  hp.hst.rate_fraction, 1.0, 1.0, 0.0, "1e4Nm3/h");
  out.sell_h2 = b.add_block(pre + "sell_h2", T, 0.0, kInf, "1e4Nm3/h");

  std::vector<double> plo(N * T), phi(N * T);
  for (int m = 0; m < N; ++m) {
    for (int t = 0; t < T; ++t) {
      plo[m * T + t] = net.nodes[m].p_min;
      phi[m * T + t] = net.nodes[m].p_max;
    }
  }
  const int p = b.add_block(pre + "pressure", plo, phi, "MPa");
  const int F = b.add_block(pre + "pipe.flow", E * T, 0.0, kInf, "1e4Nm3/h");
  const int Fin = b.add_block(pre + "pipe.in", E * T, 0.0, kInf, "1e4Nm3/h");
  const int Fout = b.add_block(pre + "pipe.out", E * T, 0.0, kInf, "1e4Nm3/h");
  const int LP = b.add_block(pre + "pipe.linepack", E * T, 0.0, kInf, "1e4Nm3");
  const int xi = b.add_block(pre + "cone.xi", E * T * (Z + 1), 0.0, kInf, "MPa");
  const int om = b.add_block(pre + "cone.omega", E * T * (Z + 1), 0.0, kInf, "MPa");

  const double h2_per_mw = units::kPower * hp.eta_p2h / units::kHydrogen;
  const double comp_per_h2 = hp.eta_comp * units::kHydrogen / units::kPower;
  const double penalty = net.pressure_penalty * dt / units::kMoney;
  for (int t = 0; t < T; ++t) {
    b.add_eq({{pro + t, 1.0}, {ae + t, -h2_per_mw}}, 0.0, at(pre + "p2h", t));
    b.add_eq({{comp + t, 1.0}, {pro + t, -comp_per_h2}}, 0.0, at(pre + "compressor", t));
    b.add_eq({{out.buy_e + t, 1.0}, {bes.st.out + t, 1.0}, {bes.st.in + t, -1.0}, {ae + t, -1.0}, {comp + t, -1.0}},
             0.0, at(pre + "power", t));

    std::vector<std::vector<Term>> bal(N);
    bal[net.source] = {{pro + t, 1.0}, {hst.out + t, 1.0}, {hst.in + t, -1.0}};
    bal[net.sink].push_back({out.sell_h2 + t, -1.0});
    for (int e = 0; e < E; ++e) {
      const auto& pipe = net.pipes[e];
      const int k = e * T + t;
      const int pm = p + pipe.from * T + t, pn = p + pipe.to * T + t;
      const std::string tag = pre + "pipe" + std::to_string(e);
      b.add_eq({{F + k, 1.0}, {Fin + k, -0.5}, {Fout + k, -0.5}}, 0.0, at(tag + ".mean", t));
      const double klp = pipe.k_lp / units::kHydrogen;
      b.add_eq({{LP + k, 1.0}, {pm, -0.5 * klp}, {pn, -0.5 * klp}}, 0.0, at(tag + ".linepack", t));
      b.add_eq({{LP + k, 1.0}, {LP + e * T + h.prev_in_week(t), -1.0}, {Fin + k, -dt}, {Fout + k, dt}}, 0.0,
               at(tag + ".dynamics", t));
      const double scale = units::kHydrogen / pipe.k_gf;
      b.add_ge({{F + k, scale}, {pm, -1.0}, {pn, 1.0}}, 0.0, at(tag + ".direction", t));
      add_polyhedral_cone(b, {F + k, scale, pm, pn}, Z, at(tag + ".cone", t), xi + k * (Z + 1),
                          om + k * (Z + 1), 1);
      b.add_cost(pm, penalty);
      b.add_cost(pn, -penalty);
      bal[pipe.to].push_back({Fout + k, 1.0});
      bal[pipe.from].push_back({Fin + k, -1.0});
    }
    for (int m = 0; m < N; ++m) b.add_eq(std::move(bal[m]), 0.0, at(pre + "h2bal" + std::to_string(m), t));
  }
  return out;
}

struct RaCols {
  int buy_h2 = -1;
  int buy_e = -1;
  int m = -1;
};

RaCols add_ra(ProgramBuilder& b, const RaParams& ra, const Horizon& h, const std::string& pre) {
  const int T = h.intervals();
  const double dt = h.dt();
  const int tau = h.tau();
  RaCols out;
  out.buy_h2 = b.add_block(pre + "buy_h2", T, 0.0, kInf, "1e4Nm3/h");
  out.buy_e = b.add_block(pre + "buy_e", T, 0.0, kInf, "100MW");
  const int back = b.add_block(pre + "backup", T, 0.0, kInf, "100MW");
  const double hcap = ra.hst.capacity / units::kHydrogen;
  const Storage hst = add_storage(b, pre + "hst", h, hcap, ra.hst.soc_min, ra.hst.soc_max,
                                  ra.hst.rate_fraction, 1.0, 1.0, 0.0, "1e4Nm3/h");
  const int use = b.add_block(pre + "h2_use", T, 0.0, kInf, "1e4Nm3/h");
  const int asy = b.add_block(pre + "asy", T, 0.0, kInf, "100MW");
  const double W = ra.asy_capacity_tph;
  out.m = b.add_block(pre + "M", T, ra.load_min * W, ra.load_max * W, "t/h");
  const double t_per_h2 = units::kHydrogen * ra.eta_h2a;
  const double t_per_power = units::kPower * ra.eta_p2a;
  for (int t = 0; t < T; ++t) {
    b.add_eq({{use + t, 1.0}, {hst.in + t, 1.0}, {hst.out + t, -1.0}, {out.buy_h2 + t, -1.0}}, 0.0,
             at(pre + "h2bal", t));
    b.add_eq({{back + t, 1.0}, {out.buy_e + t, 1.0}, {asy + t, -1.0}}, 0.0, at(pre + "power", t));
    b.add_eq({{out.m + t, 1.0}, {use + t, -t_per_h2}}, 0.0, at(pre + "h2a", t));
    b.add_eq({{out.m + t, 1.0}, {asy + t, -t_per_power}}, 0.0, at(pre + "p2a", t));
    if (t % tau != 0) {
      b.add_ge({{out.m + t, 1.0}, {out.m + t - 1, -1.0}}, -ra.ramp_down * W, at(pre + "ramp_down", t));
      b.add_le({{out.m + t, 1.0}, {out.m + t - 1, -1.0}}, ra.ramp_up * W, at(pre + "ramp_up", t));
    }
    b.add_cost(back + t, ra.backup(h.global(t)) * units::kPower / units::kMoney * dt);
  }
  return out;
}

void check_prices(const ChainPrices& p, int T) {
  const auto n = static_cast<std::size_t>(T);
  if (p.e_hp.size() != n || p.e_ra.size() != n || p.h2.size() != n) {
    throw ir::ModelError("price vectors do not match the horizon length");
  }
}

}  // namespace

ChainPrices ChainPrices::zeros(int intervals) {
  const auto n = static_cast<std::size_t>(intervals);
  return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
}

ir::ConvexProgram build_chain(const ChainParams& c, const Horizon& h, const ChainOptions& opt) {
  h.grid.validate();
  c.rg.validate(h.grid);
  c.hp.validate();
  c.ra.validate();
  const int T = h.intervals();
  const int tau = h.tau();
  const double dt = h.dt();
  if (opt.ammonia_value.size() != static_cast<std::size_t>(h.num_weeks)) {
    throw ir::ModelError("ammonia_value needs one entry per week of the horizon");
  }

  ProgramBuilder b("chain");
  const RgCols rg = add_rg(b, c.rg, h, "rg.");
  const HpCols hp = add_hp(b, c.hp, h, "hp.");
  const RaCols ra = add_ra(b, c.ra, h, "ra.");
  for (int t = 0; t < T; ++t) {
    b.add_eq({{rg.sell_hp + t, 1.0}, {hp.buy_e + t, -1.0}}, 0.0, at("clear_e_hp", t));
    b.add_eq({{rg.sell_ra + t, 1.0}, {ra.buy_e + t, -1.0}}, 0.0, at("clear_e_ra", t));
    b.add_eq({{hp.sell_h2 + t, 1.0}, {ra.buy_h2 + t, -1.0}}, 0.0, at("clear_h2", t));
    b.add_cost(ra.m + t, -opt.ammonia_value[t / tau] * dt / units::kMoney);
  }
  for (int w = 0; w < h.num_weeks; ++w) {
    if (w >= static_cast<int>(opt.yield_t.size()) || !opt.yield_t[w]) continue;
    std::vector<Term> row;
    for (int t = w * tau; t < (w + 1) * tau; ++t) row.push_back({ra.m + t, dt});
    b.add_eq(std::move(row), *opt.yield_t[w], at("yield", w));
  }
  return b.build();
}

ir::ConvexProgram build_rg(const RgParams& rg, const Horizon& h, const ChainPrices& prices) {
  h.grid.validate();
  rg.validate(h.grid);
  const int T = h.intervals();
  check_prices(prices, T);
  ProgramBuilder b("rg");
  const RgCols c = add_rg(b, rg, h, "");
  for (int t = 0; t < T; ++t) {
    b.add_cost(c.sell_hp + t, -prices.e_hp[t] / units::kElectricityPrice * h.dt());
    b.add_cost(c.sell_ra + t, -prices.e_ra[t] / units::kElectricityPrice * h.dt());
  }
  return b.build();
}

ir::ConvexProgram build_hp(const HpParams& hp, const Horizon& h, const ChainPrices& prices) {
  h.grid.validate();
  hp.validate();
  const int T = h.intervals();
  check_prices(prices, T);
  ProgramBuilder b("hp");
  const HpCols c = add_hp(b, hp, h, "");
  for (int t = 0; t < T; ++t) {
    b.add_cost(c.buy_e + t, prices.e_hp[t] / units::kElectricityPrice * h.dt());
    b.add_cost(c.sell_h2 + t, -prices.h2[t] / units::kHydrogenPrice * h.dt());
  }
  return b.build();
}

namespace {

// Weekly AST balance S[(w+1) mod W] = S[w] + production_w - D_w, in kt.
void add_ast(ProgramBuilder& b, int W, int S, int D, const std::vector<std::vector<Term>>& production,
             const std::vector<double>& constant) {
  for (int w = 0; w < W; ++w) {
    std::vector<Term> row{{S + (w + 1) % W, 1.0}, {S + w, -1.0}, {D + w, 1.0}};
    for (const auto& t : production[w]) row.push_back({t.col, -t.coef});
    b.add_eq(std::move(row), constant[w], at("ast", w));
  }
}

}  // namespace

ir::ConvexProgram build_ra(const RaParams& ra, const TimeGrid& grid, const ChainPrices& prices,
                           const RaMarket& mk) {
  grid.validate();
  ra.validate();
  mk.curve.validate();
  const Horizon h = Horizon::full(grid);
  const int T = h.intervals();
  const int W = grid.weeks;
  check_prices(prices, T);
  if (mk.rival_t.size() != static_cast<std::size_t>(W)) throw ir::ModelError("rival sales need one entry per week");

  ProgramBuilder b("ra");
  const RaCols c = add_ra(b, ra, h, "");
  for (int t = 0; t < T; ++t) {
    b.add_cost(c.buy_h2 + t, prices.h2[t] / units::kHydrogenPrice * h.dt());
    b.add_cost(c.buy_e + t, prices.e_ra[t] / units::kElectricityPrice * h.dt());
  }
  const double d_max = market::max_total_sales(mk.curve) / units::kBulk;
  const int S = b.add_block("ast", W, 0.0, ra.ast_capacity_t / units::kBulk, "kt");
  const int D = b.add_block("sales", W, 0.0, d_max, "kt");
  std::vector<std::vector<Term>> prod(W);
  for (int t = 0; t < T; ++t) prod[t / h.tau()].push_back({c.m + t, h.dt() / units::kBulk});
  add_ast(b, W, S, D, prod, std::vector<double>(W, 0.0));

  const auto rev = market::revenue_terms(mk.curve, units::kBulk, units::kMoney);
  for (int w = 0; w < W; ++w) {
    const double rival = mk.rival_t[w] / units::kBulk;
    b.add_cost(D + w, rev.linear + rev.cross * rival);
    b.add_quadratic(D + w, D + w, rev.quadratic);
    b.add_ge({{D + w, -1.0}}, rival - d_max, at("price_floor", w));
  }
  return b.build();
}

ir::ConvexProgram build_ra_trading(const RaParams& ra, const TimeGrid& grid, const market::DemandCurve& curve,
                                   const std::vector<double>& yield_t) {
  grid.validate();
  curve.validate();
  const int W = grid.weeks;
  if (yield_t.size() != static_cast<std::size_t>(W)) throw ir::ModelError("yields need one entry per week");
  if (ra.ast_capacity_t < 0) throw ir::ModelError("ra.ast.capacity_t must be >= 0");
  const double d_max = market::max_total_sales(curve) / units::kBulk;

  ProgramBuilder b("ra_trading");
  const int D = b.add_block("D", W, 0.0, d_max, "kt");
  const int S = b.add_block("S", W, 0.0, ra.ast_capacity_t / units::kBulk, "kt");
  std::vector<double> y(W);
  for (int w = 0; w < W; ++w) y[w] = yield_t[w] / units::kBulk;
  add_ast(b, W, S, D, std::vector<std::vector<Term>>(W), y);
  const auto rev = market::revenue_terms(curve, units::kBulk, units::kMarketMoney);
  for (int w = 0; w < W; ++w) {
    const int rival = b.param(at("rival", w));
    market::add_cournot_revenue(b, D + w, rival, rev);
    const int r = b.add_ge({{D + w, -1.0}}, -d_max, at("price_floor", w));
    b.add_rhs_param(r, rival, 1.0);
  }
  return b.build();
}

std::vector<double> weekly_totals(const std::vector<double>& hourly, const TimeGrid& grid) {
  if (hourly.size() != static_cast<std::size_t>(grid.intervals())) {
    throw ir::ModelError("hourly schedule does not match the grid");
  }
  std::vector<double> out(grid.weeks, 0.0);
  for (int t = 0; t < grid.intervals(); ++t) out[t / grid.intervals_per_week] += hourly[t] * grid.step_h;
  return out;
}

}  // namespace carbamm::models
