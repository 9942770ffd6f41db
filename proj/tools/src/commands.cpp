#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "carbamm/allocation/allocation.hpp"
#include "carbamm/equilibrium/engine.hpp"
#include "report.hpp"

#ifndef CARBAMM_VERSION
#define CARBAMM_VERSION "0.0.0"
#endif

namespace carbamm::cli {

namespace fs = std::filesystem;
using equilibrium::EquilibriumResult;
using market::Mechanism;

namespace {

double parse_number(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v)) throw UsageError("not a number: '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

std::vector<double> parse_range(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() != 3) throw UsageError("range must look like A:B:STEP, got '" + text + "'");
  const double a = parse_number(parts[0]), b = parse_number(parts[1]), step = parse_number(parts[2]);
  if (!(step > 0)) throw UsageError("range step must be > 0");
  if (b < a) throw UsageError("range '" + text + "' is empty");
  const long n = static_cast<long>(std::floor((b - a) / step + 1e-9)) + 1;
  if (n > 100000) throw UsageError("range '" + text + "' has too many points");
  std::vector<double> v;
  for (long i = 0; i < n; ++i) v.push_back(a + static_cast<double>(i) * step);
  return v;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> v;
  for (const auto& item : split(text, ',')) {
    if (item.find(':') != std::string::npos) {
      for (double x : parse_range(item)) v.push_back(x);
    } else {
      v.push_back(parse_number(item));
    }
  }
  if (v.empty()) throw UsageError("empty list");
  return v;
}

LoadedScenario load(const CommonArgs& args) {
  LoadedScenario L;
  if (args.scenario.empty()) {
    L.scenario = scenario::default_scenario();
    L.path = "<builtin>";
    L.sha256 = sha256_hex(scenario::to_json(L.scenario));
  } else {
    std::ifstream f(args.scenario, std::ios::binary);
    if (!f) throw UsageError("cannot open scenario " + args.scenario);
    std::stringstream ss;
    ss << f.rdbuf();
    L.scenario = scenario::parse_scenario(ss.str(), args.scenario, fs::path(args.scenario).parent_path());
    L.path = args.scenario;
    L.sha256 = sha256_hex(ss.str());
  }
  auto& sc = L.scenario;
  if (args.seed) {
    sc.solver.random_seed = static_cast<int>(*args.seed % 2147483647ULL);
    if (sc.synth) {
      sc.synth->seed = *args.seed;
      sc.chain.rg.profile = scenario::synth_res(*sc.synth, sc.grid, sc.chain.rg.wt_capacity(), sc.chain.rg.pv_capacity());
    }
  }
  if (args.jobs > 0) sc.engine.jobs = args.jobs;
  if (const char* backend = std::getenv("CARBAMM_SOLVER"); backend && *backend) {
    if (!ir::backend_available(backend)) {
      std::string list;
      for (const auto& b : ir::available_backends()) list += (list.empty() ? "" : ", ") + b;
      throw UsageError(std::string("CARBAMM_SOLVER=") + backend + " is not compiled in (available: " + list + ")");
    }
    sc.solver.backend = backend;
  }
  sc.validate();
  return L;
}

namespace {

Manifest manifest(const CommonArgs& common, const LoadedScenario& L, std::string command, std::string mechanism) {
  Manifest m;
  m.command = std::move(command);
  m.arguments = common.argv;
  m.scenario_path = L.path;
  m.scenario_sha256 = L.sha256;
  m.mechanism = std::move(mechanism);
  m.seed = common.seed;
  m.version = CARBAMM_VERSION;
  return m;
}

void add_timings(Manifest& m, const EquilibriumResult& r) {
  m.timings["sp"] += r.timings.sp;
  m.timings["outer"] += r.timings.outer;
  m.timings["inner"] += r.timings.inner;
  m.timings["verify"] += r.timings.verify;
}

void write_manifest(const fs::path& out, const Manifest& m) { write_file(out / "manifest.json", m.to_json().dump(2) + "\n"); }

market::CarbonLedger with_mechanism(market::CarbonLedger c, Mechanism m, std::optional<double> price = std::nullopt) {
  c.mechanism = m;
  c.fixed_price = price;
  return c;
}

void report_issues(const std::string& label, const EquilibriumResult& r) {
  for (const auto& issue : r.issues) std::cerr << label << ": " << issue << "\n";
}

}  // namespace

int run_solve(const CommonArgs& common, const SolveArgs& args) {
  auto L = load(common);
  auto& sc = L.scenario;
  if (!args.mechanism.empty()) {
    try {
      sc.carbon.mechanism = market::parse_mechanism(args.mechanism);
    } catch (const ir::ModelError& e) {
      throw UsageError(e.what());
    }
  }
  if (sc.carbon.mechanism == Mechanism::kM3) {
    if (args.fixed_price) sc.carbon.fixed_price = args.fixed_price;
    if (!sc.carbon.fixed_price) throw UsageError("mechanism m3 needs --fixed-price");
    if (*sc.carbon.fixed_price < 0) throw UsageError("--fixed-price must be >= 0");
  } else if (args.fixed_price) {
    throw UsageError("--fixed-price only applies to m3");
  }

  equilibrium::Pipeline pipeline(sc);
  EquilibriumResult r = pipeline.solve();
  auto doc = result_json(r);
  if (args.verify) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto rep = equilibrium::verify_equilibrium(r, sc);
    r.timings.verify = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    nlohmann::ordered_json devs = nlohmann::ordered_json::array();
    for (const auto& d : rep.deviations) {
      devs.push_back({{"stakeholder", d.stakeholder}, {"objective", d.objective}, {"best", d.best}, {"improvement", d.improvement}});
    }
    doc["verification"] = {{"deviations", devs},
                           {"grid_improvement", rep.grid_improvement},
                           {"max_improvement", rep.max_improvement()}};
    if (rep.max_improvement() > 1e-6) {
      r.issues.push_back("unilateral deviation improves by " + std::to_string(rep.max_improvement()));
      doc["certified"] = false;
      doc["issues"] = r.issues;
    }
    doc["timings_s"]["verify"] = r.timings.verify;
  }

  Manifest m = manifest(common, L, "solve", market::to_string(sc.carbon.mechanism));
  if (sc.carbon.fixed_price) m.options["fixed_price"] = format_number(*sc.carbon.fixed_price);
  m.options["verify"] = args.verify ? "yes" : "no";
  add_timings(m, r);
  const fs::path out = common.out;
  const std::string id = m.id();
  write_file(out / "equilibrium.json", doc.dump() + "\n");
  write_file(out / "summary.csv", summary_table({{sc.name, &r}}).render(id));
  write_file(out / "prices.csv", prices_table(r, sc.grid).render(id));
  write_manifest(out, m);

  std::cout << "mechanism " << market::to_string(sc.carbon.mechanism) << ": carbon price "
            << format_number(r.outer.carbon_price) << " CNY/t, traded " << format_number(r.outer.q_all_t)
            << " t, ReP2A revenue " << format_number(r.revenues.rep2a()) << " CNY\n";
  report_issues("solve", r);
  return r.certified() ? kOk : kCertification;
}

namespace {

struct SweepPoint {
  double value = 0.0;
  std::string label;
  std::optional<EquilibriumResult> result;
  std::string error;
};

CsvTable sweep_table(const std::string& param, const std::string& unit, const std::vector<SweepPoint>& points) {
  CsvTable t;
  t.column(param, unit)
      .column("case", "-")
      .column("mechanism", "-")
      .column("rep2a_revenue", "CNY")
      .column("rg_revenue", "CNY")
      .column("hp_revenue", "CNY")
      .column("ra_revenue", "CNY")
      .column("carbon_revenue", "CNY")
      .column("ga_revenue", "CNY")
      .column("ca_traded", "t")
      .column("ca_price", "CNY/t")
      .column("average_ammonia_price", "CNY/t")
      .column("green_yield", "t")
      .column("gray_yield", "t")
      .column("emissions", "t")
      .column("certified", "-")
      .column("error", "-");
  const double nan = std::nan("");
  for (const auto& p : points) {
    if (p.result) {
      const auto& r = *p.result;
      t.add_row({p.value, p.label, market::to_string(r.carbon.mechanism), r.revenues.rep2a(), r.revenues.rg,
                 r.revenues.hp, r.revenues.ra, r.revenues.carbon, r.revenues.ga_total(), r.outer.q_all_t,
                 r.outer.carbon_price, r.average_ammonia_price, r.green_yield_t, r.gray_yield_t, r.emissions_t,
                 std::string(r.certified() ? "yes" : "no"), std::string()});
    } else {
      t.add_row({p.value, p.label, std::string(), nan, nan, nan, nan, nan, nan, nan, nan, nan, nan, nan, nan,
                 std::string("no"), p.error});
    }
  }
  return t;
}

template <class F>
SweepPoint attempt(double value, std::string label, F&& run) {
  SweepPoint p;
  p.value = value;
  p.label = std::move(label);
  try {
    p.result = run();
  } catch (const std::exception& e) {
    p.error = e.what();
    std::cerr << "point " << format_number(value) << " " << p.label << ": " << e.what() << "\n";
  }
  return p;
}

std::vector<models::GaParams> rescale_allowances(std::vector<models::GaParams> ga, double q_allo) {
  double cap = 0.0;
  for (const auto& g : ga) cap += g.capacity_tph;
  for (auto& g : ga) g.allowance_t = q_allo * g.capacity_tph / cap;
  return ga;
}

}  // namespace

int run_sweep(const CommonArgs& common, const SweepArgs& args) {
  auto L = load(common);
  const auto& sc = L.scenario;
  const auto values = parse_range(args.range);
  const fs::path out = common.out;
  Manifest m = manifest(common, L, "sweep", market::to_string(sc.carbon.mechanism));
  m.options["param"] = args.param;
  m.options["range"] = args.range;
  std::vector<SweepPoint> points;
  CsvTable fig;
  std::string fig_name, unit;

  if (args.param == "fixed-carbon-price") {
    unit = "CNY/t";
    m.mechanism = "m3";
    equilibrium::Pipeline pipeline(sc);
    const auto base = pipeline.solve(with_mechanism(sc.carbon, Mechanism::kM2));
    add_timings(m, base);
    for (double price : values) {
      points.push_back(attempt(price, "m3", [&] {
        return pipeline.solve(with_mechanism(sc.carbon, Mechanism::kM3, price));
      }));
    }
    fig_name = "fig8.csv";
    fig.column("carbon_price", "CNY/t")
        .column("rep2a_revenue", "CNY")
        .column("ga_revenue", "CNY")
        .column("total_revenue", "CNY")
        .column("rep2a_baseline", "CNY")
        .column("ga_baseline", "CNY")
        .column("mutually_beneficial", "-");
    std::vector<double> good;
    bool gaps = false;
    std::size_t last = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& p = points[i];
      if (!p.result) continue;
      const auto& r = *p.result;
      const bool both = r.revenues.rep2a() >= base.revenues.rep2a() && r.revenues.ga_total() >= base.revenues.ga_total();
      if (both) {
        if (!good.empty() && i != last + 1) gaps = true;
        good.push_back(p.value);
        last = i;
      }
      fig.add_row({p.value, r.revenues.rep2a(), r.revenues.ga_total(), r.revenues.rep2a() + r.revenues.ga_total(),
                   base.revenues.rep2a(), base.revenues.ga_total(), std::string(both ? "yes" : "no")});
    }
    std::string verdict = good.empty()
                              ? std::string("mutually beneficial interval: none on this grid")
                              : "mutually beneficial interval: [" + format_number(good.front()) + ", " +
                                    format_number(good.back()) + "] CNY/t" + (gaps ? " (not contiguous)" : "");
    fig.note(verdict);
    std::cout << verdict << "\n";
  } else if (args.param == "carbon-cap") {
    unit = "t";
    equilibrium::Pipeline pipeline(sc);
    for (double cap : values) {
      points.push_back(attempt(cap, "q_allo", [&] {
        if (cap < 0) throw UsageError("carbon cap must be >= 0");
        auto carbon = sc.carbon;
        carbon.q_allo_t = cap;
        pipeline.set_market(rescale_allowances(sc.ga, cap), carbon);
        return pipeline.solve();
      }));
    }
    fig_name = "fig12.csv";
    fig.column("carbon_cap", "t")
        .column("rep2a_revenue", "CNY")
        .column("ga_revenue", "CNY")
        .column("total_revenue", "CNY")
        .column("average_ammonia_price", "CNY/t")
        .column("carbon_price", "CNY/t");
    for (const auto& p : points) {
      if (!p.result) continue;
      const auto& r = *p.result;
      fig.add_row({p.value, r.revenues.rep2a(), r.revenues.ga_total(), r.revenues.rep2a() + r.revenues.ga_total(),
                   r.average_ammonia_price, r.outer.carbon_price});
    }
  } else if (args.param == "ra-capacity-mult") {
    unit = "-";
    for (double mult : values) {
      points.push_back(attempt(mult, "ra x" + format_number(mult), [&] {
        if (!(mult > 0)) throw UsageError("capacity multiplier must be > 0");
        auto s = sc;
        s.chain.ra.asy_capacity_tph *= mult;
        s.chain.ra.ast_capacity_t *= mult;
        if (s.grandfather) {
          std::vector<double> caps;
          for (const auto& g : s.ga) caps.push_back(g.capacity_tph);
          const double gray = std::accumulate(caps.begin(), caps.end(), 0.0);
          caps.push_back(s.chain.ra.asy_capacity_tph);
          auto shares = s.grandfather->shares;
          if (shares.size() != 2) shares = {gray, sc.chain.ra.asy_capacity_tph};
          shares[1] *= mult;
          const auto c = scenario::grandfather_caps(*s.grandfather, caps, s.grid, shares);
          s.carbon.q_allo_t = c.q_allo_t;
          s.carbon.q_rewa_t = c.q_rewa_t;
          s.ga = rescale_allowances(s.ga, c.q_allo_t);
        } else {
          s.carbon.q_rewa_t *= mult;
        }
        equilibrium::Pipeline pipeline(s);
        return pipeline.solve();
      }));
    }
    fig_name = "fig13.csv";
    fig.column("ra_capacity_mult", "-")
        .column("rep2a_revenue", "CNY")
        .column("ga_revenue", "CNY")
        .column("average_ammonia_price", "CNY/t")
        .column("carbon_price", "CNY/t")
        .column("ra_utilization", "-")
        .column("q_rewa", "t");
    for (const auto& p : points) {
      if (!p.result) continue;
      const auto& r = *p.result;
      fig.add_row({p.value, r.revenues.rep2a(), r.revenues.ga_total(), r.average_ammonia_price, r.outer.carbon_price,
                   r.ra_utilization, r.carbon.q_rewa_t});
    }
  } else if (args.param == "ga-count") {
    unit = "-";
    int max_n = 0;
    for (double v : values) {
      if (v < 1 || v > 6 || v != std::floor(v)) throw UsageError("ga-count values must be integers in [1, 6]");
      max_n = std::max(max_n, static_cast<int>(v));
    }
    const auto& g0 = sc.ga.front();
    double cap = 0.0;
    for (const auto& g : sc.ga) cap += g.capacity_tph;
    equilibrium::Pipeline pipeline(sc);
    fig_name = "table7.csv";
    fig.column("ga_count", "-").column("participants", "-").column("ca_price", "CNY/t")
        .column("average_ammonia_price", "CNY/t").column("ga_revenue_total", "CNY").column("ga_revenue_mean", "CNY");
    for (int i = 0; i < max_n; ++i) fig.column("ga" + std::to_string(i + 1) + "_revenue", "CNY");
    for (double v : values) {
      const int n = static_cast<int>(v);
      for (int mask = (1 << n) - 1; mask >= 0; --mask) {
        std::vector<models::GaParams> ga(n, g0);
        std::string label;
        for (int i = 0; i < n; ++i) {
          ga[i].name = "GA" + std::to_string(i + 1);
          ga[i].capacity_tph = cap / n;
          ga[i].participates = (mask >> i) & 1;
          if (ga[i].participates) label += (label.empty() ? "" : "+") + ga[i].name;
        }
        if (label.empty()) label = "none";
        ga = rescale_allowances(std::move(ga), sc.carbon.q_allo_t);
        points.push_back(attempt(v, label, [&] {
          pipeline.set_market(ga, sc.carbon);
          return pipeline.solve();
        }));
        const auto& p = points.back();
        if (!p.result) continue;
        const auto& r = *p.result;
        std::vector<Cell> row{v, label, r.outer.carbon_price, r.average_ammonia_price, r.revenues.ga_total(),
                              r.revenues.ga_total() / n};
        for (int i = 0; i < max_n; ++i) row.push_back(i < n ? Cell(r.revenues.ga[i]) : Cell(std::string()));
        fig.add_row(std::move(row));
      }
    }
  } else {
    throw UsageError("unknown sweep parameter '" + args.param +
                     "' (fixed-carbon-price, carbon-cap, ra-capacity-mult, ga-count)");
  }

  for (const auto& p : points) {
    if (p.result) add_timings(m, *p.result);
  }
  const std::string id = m.id();
  write_file(out / "sweep.csv", sweep_table(args.param, unit, points).render(id));
  write_file(out / fig_name, fig.render(id));
  write_manifest(out, m);
  int failed = 0;
  for (const auto& p : points) failed += p.result ? 0 : 1;
  std::cout << points.size() << " points, " << failed << " failed\n";
  return failed ? kInfeasible : kOk;
}

int run_allocate(const CommonArgs& common, const AllocateArgs& args) {
  auto L = load(common);
  const auto& sc = L.scenario;

  std::optional<allocation::Stakeholder> target;
  if (args.cam.rfind("cam1:", 0) == 0) {
    const std::string who = args.cam.substr(5);
    for (int k = 0; k < 3; ++k) {
      if (who == allocation::kStakeholderNames[k]) target = static_cast<allocation::Stakeholder>(k);
    }
    if (!target) throw UsageError("cam1 target must be rg, hp or ra");
  } else if (args.cam != "pcam" && args.cam != "cam2") {
    throw UsageError("--cam must be pcam, cam1:TARGET or cam2");
  }

  equilibrium::Pipeline pipeline(sc);
  const auto base = pipeline.solve(with_mechanism(sc.carbon, Mechanism::kM2));
  const auto trade = pipeline.solve(with_mechanism(sc.carbon, Mechanism::kPcim));
  report_issues("m2", base);
  report_issues("pcim", trade);
  const auto in = allocation::allocation_input(trade, base);
  allocation::AllocationResult a;
  if (target) {
    a = allocation::allocate_baseline(in, allocation::Cam1{*target});
  } else if (args.cam == "cam2") {
    a = allocation::allocate_baseline(in, allocation::Cam2{});
  } else {
    a = allocation::allocate_pcam(in);
  }

  Manifest m = manifest(common, L, "allocate", "pcim");
  m.options["cam"] = args.cam;
  add_timings(m, base);
  add_timings(m, trade);
  const fs::path out = common.out;
  write_file(out / "allocation.csv", allocation_table(in, {a}).render(m.id()));
  write_manifest(out, m);

  for (int k = 0; k < 3; ++k) {
    std::cout << allocation::kStakeholderNames[k] << ": q " << format_number(a.q_t[k]) << " t, change "
              << format_number(100.0 * a.delta_j[k]) << "%" << (a.ir[k] ? "" : " (worse than without trading)") << "\n";
  }
  if (!a.feasible) {
    std::cerr << "allocate: " << a.message << "\n";
    return kCertification;
  }
  return base.certified() && trade.certified() ? kOk : kCertification;
}

int run_perturb(const CommonArgs& common, const PerturbArgs& args) {
  auto L = load(common);
  auto& sc = L.scenario;
  sc.carbon.mechanism = Mechanism::kPcim;
  sc.carbon.fixed_price.reset();
  auto volumes = parse_list(args.volumes);
  for (auto& v : volumes) {
    if (args.kilotonnes) v *= 1e3;
    if (v < 0 || v > sc.carbon.q_rewa_t + allocation::kVolumeRounding) {
      throw UsageError("volume " + format_number(v) + " t outside [0, q_rewa = " + format_number(sc.carbon.q_rewa_t) +
                       " t]");
    }
  }

  equilibrium::Pipeline pipeline(sc);
  const auto base = pipeline.solve(with_mechanism(sc.carbon, Mechanism::kM2));
  const auto rep = allocation::perturb_ir(pipeline, volumes, base);

  Manifest m = manifest(common, L, "perturb-ir", "pcim");
  std::string list;
  for (double v : volumes) list += (list.empty() ? "" : ",") + format_number(v);
  m.options["volumes_t"] = list;
  add_timings(m, base);
  const fs::path out = common.out;
  write_file(out / "perturbation.csv", perturbation_table(rep).render(m.id()));
  write_manifest(out, m);

  const char* cols[4] = {"rep2a", "rg", "hp", "ra"};
  for (int c = 0; c < 4; ++c) {
    std::cout << cols[c] << ": " << (rep.nondecreasing[c] ? "nondecreasing" : "not nondecreasing") << "\n";
  }
  for (const auto& r : rep.rows) {
    if (!r.error.empty()) std::cerr << "volume " << format_number(r.volume_t) << ": " << r.error << "\n";
  }
  return rep.all_nondecreasing() ? kOk : kCertification;
}

}  // namespace carbamm::cli
