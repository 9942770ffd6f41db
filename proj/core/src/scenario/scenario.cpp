#include "carbamm/scenario/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace carbamm::scenario {

using json = nlohmann::ordered_json;

models::ResProfile synth_res(const SynthSpec& s, const models::TimeGrid& grid, double wt_cap, double pv_cap) {
  grid.validate();
  if (wt_cap < 0 || pv_cap < 0) throw ScenarioError("synthetic profile: capacities must be >= 0");
  const int T = grid.intervals();
  models::ResProfile p;
  p.wt_mw.resize(T);
  p.pv_mw.resize(T);
  std::mt19937_64 rng(s.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(s.pv_clearness_min, 1.0);

  const double phi = s.wind_persistence;
  const double innovation = s.wind_volatility * std::sqrt(std::max(0.0, 1.0 - phi * phi));
  double x = s.wind_mean;
  double clearness = 1.0;
  int day = -1;
  for (int t = 0; t < T; ++t) {
    x = s.wind_mean + phi * (x - s.wind_mean) + innovation * normal(rng);
    const double w = std::clamp(x, std::max(0.0, s.wind_floor), 1.0);
    p.wt_mw[t] = wt_cap * w;

    const double hour = std::fmod(t * grid.step_h, 24.0);
    const int d = static_cast<int>(std::floor(t * grid.step_h / 24.0));
    if (d != day) {
      day = d;
      clearness = uniform(rng);
    }
    double mask = 0.0;
    if (hour > s.sunrise_h && hour < s.sunset_h) {
      mask = std::sin(std::numbers::pi * (hour - s.sunrise_h) / (s.sunset_h - s.sunrise_h));
    }
    p.pv_mw[t] = std::clamp(pv_cap * mask * clearness, 0.0, pv_cap);
  }
  return p;
}

Caps grandfather_caps(const GrandfatherSpec& g, const std::vector<double>& caps, const models::TimeGrid& grid,
                      const std::vector<double>& shares) {
  if (!(g.utilization > 0 && g.utilization <= 1)) throw ScenarioError("grandfather.utilization must be in (0, 1]");
  if (!(g.reduction > 0 && g.reduction <= 1)) throw ScenarioError("grandfather.reduction must be in (0, 1]");
  if (!(g.emission_t_per_t > 0)) throw ScenarioError("grandfather.emission_t_per_t must be > 0");
  double sum = 0.0;
  for (double c : caps) {
    if (c < 0) throw ScenarioError("grandfather: negative capacity");
    sum += c;
  }
  if (!(sum > 0)) throw ScenarioError("grandfather: zero capacities");
  if (shares.size() != 2 || shares[0] < 0 || shares[1] < 0 || !(shares[0] + shares[1] > 0)) {
    throw ScenarioError("grandfather.shares needs two nonnegative entries");
  }
  Caps c;
  c.total_t = g.emission_t_per_t * sum * grid.intervals_per_week * grid.step_h * grid.weeks * g.utilization *
              g.reduction;
  c.q_allo_t = c.total_t * shares[0] / (shares[0] + shares[1]);
  c.q_rewa_t = c.total_t * shares[1] / (shares[0] + shares[1]);
  return c;
}

std::vector<int> Scenario::participants() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < ga.size(); ++i) {
    if (ga[i].participates) out.push_back(static_cast<int>(i));
  }
  return out;
}

void Scenario::validate() const {
  try {
    grid.validate();
    if (ga.empty()) throw ScenarioError("at least one GA producer is required");
    std::set<std::string> names;
    for (const auto& g : ga) {
      g.validate();
      if (!names.insert(g.name).second) throw ScenarioError("duplicate GA name '" + g.name + "'");
    }
    chain.rg.validate(grid);
    chain.hp.validate();
    chain.ra.validate();
    if (!chain.ra.backup_price_profile.empty() &&
        chain.ra.backup_price_profile.size() != static_cast<std::size_t>(grid.intervals())) {
      throw ScenarioError("ra.backup_price profile length does not match weeks*intervals");
    }
    curve.validate();
    carbon.validate();
    if (!(engine.rho_ref > 0)) throw ScenarioError("engine.rho_ref must be > 0");
    if (engine.chain_lp_method != "simplex" && engine.chain_lp_method != "ipm") {
      throw ScenarioError("engine.chain_lp_method must be 'simplex' or 'ipm'");
    }
    if (solver.lp_method != "simplex" && solver.lp_method != "ipm") {
      throw ScenarioError("solver.lp_method must be 'simplex' or 'ipm'");
    }
    if (engine.jobs < 1) throw ScenarioError("engine.jobs must be >= 1");
    if (engine.max_fixed_point < 1) throw ScenarioError("engine.max_fixed_point must be >= 1");
    if (!(engine.multiplier_big_m > 0) || !std::isfinite(engine.multiplier_big_m)) {
      throw ScenarioError("engine.multiplier_big_m must be finite and > 0");
    }
  } catch (const ir::ModelError& e) {
    throw ScenarioError(e.what());
  }
}

namespace {

// Maps JSON pointers of keys and array elements to 1-based source lines.
class LineIndex {
 public:
  explicit LineIndex(const std::string& text) { scan(text); }

  int line(const std::string& pointer) const {
    std::string p = pointer;
    while (true) {
      auto it = lines_.find(p);
      if (it != lines_.end()) return it->second;
      const auto cut = p.rfind('/');
      if (cut == std::string::npos || p.empty()) return 1;
      p.resize(cut);
    }
  }

 private:
  struct Frame {
    std::string path;
    bool array = false;
    int index = 0;
  };

  void scan(const std::string& s) {
    std::vector<Frame> stack;
    int line = 1;
    std::string pending_key;
    bool have_key = false;
    lines_[""] = 1;
    auto value_path = [&]() -> std::string {
      if (stack.empty()) return "";
      auto& f = stack.back();
      if (f.array) return f.path + "/" + std::to_string(f.index);
      return f.path + "/" + pending_key;
    };
    auto mark_value = [&]() {
      if (!stack.empty() && stack.back().array) lines_.emplace(value_path(), line);
    };
    for (std::size_t i = 0; i < s.size(); ++i) {
      const char c = s[i];
      if (c == '\n') {
        ++line;
      } else if (c == '"') {
        std::string str;
        for (++i; i < s.size() && s[i] != '"'; ++i) {
          if (s[i] == '\\' && i + 1 < s.size()) {
            str += s[++i];
          } else {
            if (s[i] == '\n') ++line;
            str += s[i];
          }
        }
        if (!stack.empty() && !stack.back().array && !have_key) {
          std::size_t j = i + 1;
          while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
          if (j < s.size() && s[j] == ':') {
            pending_key = escape(str);
            have_key = true;
            lines_.emplace(value_path(), line);
            continue;
          }
        }
        mark_value();
      } else if (c == '{' || c == '[') {
        mark_value();
        const std::string path = value_path();
        stack.push_back({path, c == '[', 0});
        have_key = false;
      } else if (c == '}' || c == ']') {
        if (!stack.empty()) stack.pop_back();
      } else if (c == ',') {
        if (!stack.empty()) {
          if (stack.back().array) ++stack.back().index;
          have_key = false;
        }
      } else if (!std::isspace(static_cast<unsigned char>(c)) && c != ':') {
        mark_value();
        while (i + 1 < s.size() && std::string(",}] \t\r\n").find(s[i + 1]) == std::string::npos) ++i;
      }
    }
  }

  static std::string escape(const std::string& key) {
    std::string out;
    for (char c : key) {
      if (c == '~') out += "~0";
      else if (c == '/') out += "~1";
      else out += c;
    }
    return out;
  }

  std::map<std::string, int> lines_;
};

struct Context {
  std::string origin;
  const LineIndex* index = nullptr;
  std::filesystem::path base_dir;

  [[noreturn]] void fail(const std::string& pointer, const std::string& what) const {
    throw ScenarioError(origin + ":" + std::to_string(index->line(pointer)) + ": " + what);
  }
};

// Strict view of a JSON object: every key must be consumed.
class Obj {
 public:
  Obj(const Context& ctx, const json& j, std::string pointer) : ctx_(ctx), j_(j), ptr_(std::move(pointer)) {
    if (!j_.is_object()) ctx_.fail(ptr_, "'" + dotted() + "' must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  Obj child(const std::string& key) {
    if (!has(key)) ctx_.fail(ptr_, "missing field '" + dotted(key) + "'");
    return Obj(ctx_, raw(key), ptr_ + "/" + key);
  }

  double num(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    return num(key);
  }
  double num(const std::string& key) {
    if (!has(key)) ctx_.fail(ptr_, "missing field '" + dotted(key) + "'");
    const auto& v = raw(key);
    if (!v.is_number()) ctx_.fail(ptr_ + "/" + key, "'" + dotted(key) + "' must be a number");
    return v.get<double>();
  }
  int integer(const std::string& key, int fallback) {
    if (!has(key)) return fallback;
    const auto& v = raw(key);
    if (!v.is_number_integer()) ctx_.fail(ptr_ + "/" + key, "'" + dotted(key) + "' must be an integer");
    return v.get<int>();
  }
  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = raw(key);
    if (!v.is_boolean()) ctx_.fail(ptr_ + "/" + key, "'" + dotted(key) + "' must be a boolean");
    return v.get<bool>();
  }
  std::string str(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const auto& v = raw(key);
    if (!v.is_string()) ctx_.fail(ptr_ + "/" + key, "'" + dotted(key) + "' must be a string");
    return v.get<std::string>();
  }
  std::vector<double> numbers(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_array()) ctx_.fail(ptr_ + "/" + key, "'" + dotted(key) + "' must be an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) {
        ctx_.fail(ptr_ + "/" + key + "/" + std::to_string(i), "'" + dotted(key) + "' entries must be numbers");
      }
      out.push_back(v[i].get<double>());
    }
    return out;
  }
  template <class F>
  void each(const std::string& key, F&& f) {
    if (!has(key)) ctx_.fail(ptr_, "missing field '" + dotted(key) + "'");
    const auto& v = raw(key);
    if (!v.is_array()) ctx_.fail(ptr_ + "/" + key, "'" + dotted(key) + "' must be an array");
    for (std::size_t i = 0; i < v.size(); ++i) {
      Obj o(ctx_, v[i], ptr_ + "/" + key + "/" + std::to_string(i));
      f(o);
      o.finish();
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) ctx_.fail(ptr_ + "/" + it.key(), "unknown field '" + dotted(it.key()) + "'");
    }
  }

  // Runs `check`, converting model errors into located scenario errors.
  template <class F>
  void check(F&& f) const {
    try {
      f();
    } catch (const ir::ModelError& e) {
      ctx_.fail(ptr_, e.what());
    } catch (const ScenarioError& e) {
      ctx_.fail(ptr_, e.what());
    }
  }

  std::string dotted(const std::string& key = {}) const {
    std::string out;
    std::stringstream ss(ptr_);
    std::string part;
    while (std::getline(ss, part, '/')) {
      if (part.empty()) continue;
      if (!out.empty()) out += '.';
      out += part;
    }
    if (!key.empty()) out += (out.empty() ? "" : ".") + key;
    return out;
  }

 private:
  const Context& ctx_;
  const json& j_;
  std::string ptr_;
  std::set<std::string> used_;
};

void read_bes(Obj o, models::BesParams& b) {
  b.capacity_mwh = o.num("capacity_mwh", b.capacity_mwh);
  b.eta_charge = o.num("eta_charge", b.eta_charge);
  b.eta_discharge = o.num("eta_discharge", b.eta_discharge);
  b.self_discharge = o.num("self_discharge", b.self_discharge);
  b.soc_min = o.num("soc_min", b.soc_min);
  b.soc_max = o.num("soc_max", b.soc_max);
  b.degradation_cny_per_mwh = o.num("degradation_cny_per_mwh", b.degradation_cny_per_mwh);
  o.finish();
  o.check([&] { b.validate(o.dotted()); });
}

void read_storage(Obj o, models::StorageParams& s) {
  s.capacity = o.num("capacity_nm3", s.capacity);
  s.soc_min = o.num("soc_min", s.soc_min);
  s.soc_max = o.num("soc_max", s.soc_max);
  s.rate_fraction = o.num("rate_fraction", s.rate_fraction);
  o.finish();
  o.check([&] {
    if (!(s.capacity >= 0)) throw ScenarioError(o.dotted() + ".capacity_nm3 must be >= 0");
    if (!(s.soc_min >= 0 && s.soc_min <= s.soc_max && s.soc_max <= 1)) {
      throw ScenarioError(o.dotted() + ".soc_min <= soc_max within [0, 1] violated");
    }
    if (!(s.rate_fraction >= 0)) throw ScenarioError(o.dotted() + ".rate_fraction must be >= 0");
  });
}

void read_asy(Obj o, double& cap, double& lmin, double& lmax, double& rdown, double& rup) {
  cap = o.num("capacity_tph", cap);
  lmin = o.num("load_min", lmin);
  lmax = o.num("load_max", lmax);
  rdown = o.num("ramp_down", rdown);
  rup = o.num("ramp_up", rup);
  o.finish();
  o.check([&] {
    if (!(lmin >= 0 && lmin <= lmax && lmax <= 1)) {
      throw ScenarioError(o.dotted() + " load_min <= load_max within [0, 1] violated");
    }
    if (!(cap > 0)) throw ScenarioError(o.dotted() + ".capacity_tph must be > 0");
    if (!(rdown > 0 && rup > 0)) throw ScenarioError(o.dotted() + " ramp fractions must be > 0");
  });
}

SynthSpec read_synth(Obj o) {
  SynthSpec s;
  const auto seed = o.num("seed", static_cast<double>(s.seed));
  s.seed = static_cast<std::uint64_t>(seed);
  s.wind_mean = o.num("wind_mean", s.wind_mean);
  s.wind_volatility = o.num("wind_volatility", s.wind_volatility);
  s.wind_persistence = o.num("wind_persistence", s.wind_persistence);
  s.wind_floor = o.num("wind_floor", s.wind_floor);
  s.pv_clearness_min = o.num("pv_clearness_min", s.pv_clearness_min);
  s.sunrise_h = o.num("sunrise_h", s.sunrise_h);
  s.sunset_h = o.num("sunset_h", s.sunset_h);
  o.finish();
  o.check([&] {
    if (!(s.wind_mean >= 0 && s.wind_mean <= 1)) throw ScenarioError("wind_mean must be in [0, 1]");
    if (!(s.wind_volatility >= 0)) throw ScenarioError("wind_volatility must be >= 0");
    if (!(s.wind_persistence >= 0 && s.wind_persistence < 1)) throw ScenarioError("wind_persistence must be in [0, 1)");
    if (!(s.pv_clearness_min >= 0 && s.pv_clearness_min <= 1)) throw ScenarioError("pv_clearness_min must be in [0, 1]");
    if (!(s.sunrise_h < s.sunset_h)) throw ScenarioError("sunrise_h must precede sunset_h");
  });
  return s;
}

}  // namespace

models::ResProfile load_profile_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open profile '" + path.string() + "'");
  std::string line;
  int n = 0;
  models::ResProfile p;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (n == 1) {
      if (line.rfind("wt_mw", 0) != 0) {
        throw ScenarioError(path.string() + ":1: header row 'wt_mw,pv_mw' required");
      }
      continue;
    }
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',')) {
      throw ScenarioError(path.string() + ":" + std::to_string(n) + ": expected two columns");
    }
    try {
      std::size_t ia = 0, ib = 0;
      const double wa = std::stod(a, &ia), wb = std::stod(b, &ib);
      p.wt_mw.push_back(wa);
      p.pv_mw.push_back(wb);
    } catch (const std::exception&) {
      throw ScenarioError(path.string() + ":" + std::to_string(n) + ": not a number");
    }
  }
  return p;
}

Scenario parse_scenario(const std::string& text, const std::string& origin, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(origin + ": " + e.what());
  }
  const LineIndex index(text);
  const Context ctx{origin, &index, base_dir};
  Obj root(ctx, j, "");
  Scenario sc;

  const int version = root.integer("schema_version", -1);
  if (version != 1) ctx.fail("/schema_version", "schema_version must be 1");
  sc.name = root.str("name", sc.name);
  sc.note = root.str("note", "");

  if (root.has("time")) {
    Obj t = root.child("time");
    sc.grid.weeks = t.integer("weeks", sc.grid.weeks);
    sc.grid.intervals_per_week = t.integer("intervals_per_week", sc.grid.intervals_per_week);
    sc.grid.step_h = t.num("step_h", sc.grid.step_h);
    t.finish();
    t.check([&] { sc.grid.validate(); });
  }

  {
    Obj m = root.child("market");
    sc.curve.rho_max = m.num("rho_max", sc.curve.rho_max);
    sc.curve.k = m.num("k_am", sc.curve.k);
    m.finish();
    m.check([&] { sc.curve.validate(); });
  }

  sc.ga.clear();
  std::vector<bool> has_allowance;
  root.each("ga", [&](Obj& g) {
    models::GaParams p;
    p.name = g.str("name", "GA" + std::to_string(sc.ga.size() + 1));
    read_asy(g.child("asy"), p.capacity_tph, p.load_min, p.load_max, p.ramp_down, p.ramp_up);
    p.cost_cny_per_t = g.num("cost_cny_per_t", p.cost_cny_per_t);
    p.emission_t_per_t = g.num("emission_t_per_t", p.emission_t_per_t);
    has_allowance.push_back(g.has("allowance_t"));
    p.allowance_t = g.num("allowance_t", 0.0);
    p.participates = g.boolean("participates", true);
    g.check([&] { p.validate(); });
    sc.ga.push_back(p);
  });

  {
    Obj rg = root.child("rg");
    auto& R = sc.chain.rg;
    {
      Obj net = rg.child("network");
      net.each("buses", [&](Obj& b) {
        models::Bus bus;
        bus.name = b.str("name", "bus" + std::to_string(R.network.buses.size()));
        bus.v_min = b.num("v_min", bus.v_min);
        bus.v_max = b.num("v_max", bus.v_max);
        R.network.buses.push_back(bus);
      });
      net.each("branches", [&](Obj& b) {
        models::Branch br;
        br.from = b.integer("from", -1);
        br.to = b.integer("to", -1);
        br.r = b.num("r", 0.0);
        br.x = b.num("x", 0.0);
        R.network.branches.push_back(br);
      });
      net.finish();
      net.check([&] { R.network.validate(); });
    }
    auto units = [&](const std::string& key, std::vector<models::RenewableUnit>& out) {
      rg.each(key, [&](Obj& u) {
        models::RenewableUnit unit;
        unit.bus = u.integer("bus", 0);
        unit.capacity_mw = u.num("capacity_mw");
        out.push_back(unit);
      });
    };
    units("wt", R.wt);
    units("pv", R.pv);
    {
      Obj bes = rg.child("bes");
      R.bes_bus = bes.integer("bus", 0);
      read_bes(bes, R.bes);
    }
    R.hp_bus = rg.integer("hp_bus", 0);
    R.ra_bus = rg.integer("ra_bus", 0);
    if (rg.has("reactive_compensation")) {
      Obj vc = rg.child("reactive_compensation");
      R.reactive_compensation = vc.boolean("enabled", false);
      R.vc_max_mvar = vc.num("max_mvar", 0.0);
      vc.finish();
    }
    {
      Obj pr = rg.child("profile");
      if (pr.has("synthetic")) {
        sc.synth = read_synth(pr.child("synthetic"));
        R.profile = synth_res(*sc.synth, sc.grid, R.wt_capacity(), R.pv_capacity());
      } else if (pr.has("csv")) {
        const std::filesystem::path p = pr.str("csv", "");
        pr.check([&] { R.profile = load_profile_csv(p.is_absolute() ? p : base_dir / p); });
      } else {
        R.profile.wt_mw = pr.numbers("wt_mw");
        R.profile.pv_mw = pr.numbers("pv_mw");
      }
      pr.finish();
    }
    rg.finish();
    rg.check([&] { R.validate(sc.grid); });
  }

  {
    Obj hp = root.child("hp");
    auto& H = sc.chain.hp;
    {
      Obj ae = hp.child("ae");
      H.ae_capacity_mw = ae.num("capacity_mw", H.ae_capacity_mw);
      H.eta_p2h = ae.num("eta_p2h", H.eta_p2h);
      H.load_min = ae.num("load_min", H.load_min);
      H.load_max = ae.num("load_max", H.load_max);
      ae.finish();
    }
    H.eta_comp = hp.num("eta_comp", H.eta_comp);
    read_storage(hp.child("hst"), H.hst);
    read_bes(hp.child("bes"), H.bes);
    {
      Obj pl = hp.child("pipeline");
      auto& P = H.pipeline;
      pl.each("nodes", [&](Obj& n) {
        models::H2Node node;
        node.name = n.str("name", "node" + std::to_string(P.nodes.size()));
        node.p_min = n.num("p_min", node.p_min);
        node.p_max = n.num("p_max", node.p_max);
        P.nodes.push_back(node);
      });
      pl.each("pipes", [&](Obj& p) {
        models::Pipe pipe;
        pipe.from = p.integer("from", -1);
        pipe.to = p.integer("to", -1);
        pipe.k_gf = p.num("k_gf", pipe.k_gf);
        pipe.k_lp = p.num("k_lp", pipe.k_lp);
        P.pipes.push_back(pipe);
      });
      P.source = pl.integer("source", P.source);
      P.sink = pl.integer("sink", P.sink);
      P.depth = pl.integer("depth", P.depth);
      P.pressure_penalty = pl.num("pressure_penalty", P.pressure_penalty);
      pl.finish();
      pl.check([&] { P.validate(); });
    }
    hp.finish();
    hp.check([&] { H.validate(); });
  }

  {
    Obj ra = root.child("ra");
    auto& A = sc.chain.ra;
    read_asy(ra.child("asy"), A.asy_capacity_tph, A.load_min, A.load_max, A.ramp_down, A.ramp_up);
    A.eta_h2a = ra.num("eta_h2a", A.eta_h2a);
    A.eta_p2a = ra.num("eta_p2a", A.eta_p2a);
    read_storage(ra.child("hst"), A.hst);
    {
      Obj ast = ra.child("ast");
      A.ast_capacity_t = ast.num("capacity_t", A.ast_capacity_t);
      ast.finish();
    }
    if (ra.has("backup_price") && ra.raw("backup_price").is_array()) {
      A.backup_price_profile = ra.numbers("backup_price");
      A.backup_price = A.backup_price_profile.empty() ? 0.0 : A.backup_price_profile.front();
    } else {
      A.backup_price = ra.num("backup_price", A.backup_price);
    }
    ra.finish();
    ra.check([&] { A.validate(); });
  }

  {
    Obj c = root.child("carbon");
    const std::string mech = c.str("mechanism", "pcim");
    c.check([&] { sc.carbon.mechanism = market::parse_mechanism(mech); });
    if (c.has("fixed_price") && !c.raw("fixed_price").is_null()) sc.carbon.fixed_price = c.num("fixed_price");
    if (c.has("grandfather")) {
      Obj g = c.child("grandfather");
      GrandfatherSpec spec;
      spec.emission_t_per_t = g.num("emission_t_per_t", spec.emission_t_per_t);
      spec.utilization = g.num("utilization", spec.utilization);
      spec.reduction = g.num("reduction", spec.reduction);
      if (g.has("shares")) spec.shares = g.numbers("shares");
      g.finish();
      sc.grandfather = spec;
    }
    const bool explicit_caps = c.has("q_allo_t") || c.has("q_rewa_t");
    if (explicit_caps) {
      sc.carbon.q_allo_t = c.num("q_allo_t");
      sc.carbon.q_rewa_t = c.num("q_rewa_t");
    } else if (sc.grandfather) {
      std::vector<double> caps;
      for (const auto& g : sc.ga) caps.push_back(g.capacity_tph);
      std::vector<double> shares = sc.grandfather->shares;
      if (shares.empty()) {
        double gray = 0.0;
        for (double v : caps) gray += v;
        shares = {gray, sc.chain.ra.asy_capacity_tph};
      }
      c.check([&] {
        const Caps caps_t = grandfather_caps(*sc.grandfather, caps, sc.grid, shares);
        sc.carbon.q_allo_t = caps_t.q_allo_t;
        sc.carbon.q_rewa_t = caps_t.q_rewa_t;
      });
    } else {
      ctx.fail("/carbon", "carbon needs q_allo_t and q_rewa_t or a grandfather block");
    }
    c.finish();
    c.check([&] { sc.carbon.validate(); });
  }

  // GA allowances default to capacity shares of q_allo.
  double cap_sum = 0.0;
  for (const auto& g : sc.ga) cap_sum += g.capacity_tph;
  for (std::size_t i = 0; i < sc.ga.size(); ++i) {
    if (!has_allowance[i]) sc.ga[i].allowance_t = sc.carbon.q_allo_t * sc.ga[i].capacity_tph / cap_sum;
  }

  if (root.has("engine")) {
    Obj e = root.child("engine");
    sc.engine.rho_ref = e.num("rho_ref", sc.engine.rho_ref);
    sc.engine.multiplier_big_m = e.num("multiplier_big_m", sc.engine.multiplier_big_m);
    sc.engine.max_fixed_point = e.integer("max_fixed_point", sc.engine.max_fixed_point);
    sc.engine.jobs = e.integer("jobs", sc.engine.jobs);
    sc.engine.chain_lp_method = e.str("chain_lp_method", sc.engine.chain_lp_method);
    e.finish();
  }
  if (root.has("solver")) {
    Obj s = root.child("solver");
    sc.solver.backend = s.str("backend", sc.solver.backend);
    sc.solver.feasibility_tol = s.num("feasibility_tol", sc.solver.feasibility_tol);
    sc.solver.optimality_tol = s.num("optimality_tol", sc.solver.optimality_tol);
    sc.solver.mip_rel_gap = s.num("mip_rel_gap", sc.solver.mip_rel_gap);
    sc.solver.time_limit = s.num("time_limit", sc.solver.time_limit);
    sc.solver.random_seed = s.integer("seed", sc.solver.random_seed);
    sc.solver.lp_method = s.str("lp_method", sc.solver.lp_method);
    s.finish();
  }
  root.finish();
  root.check([&] { sc.validate(); });
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path.string(), path.parent_path());
}

namespace {

json bes_json(const models::BesParams& b) {
  return {{"capacity_mwh", b.capacity_mwh},
          {"eta_charge", b.eta_charge},
          {"eta_discharge", b.eta_discharge},
          {"self_discharge", b.self_discharge},
          {"soc_min", b.soc_min},
          {"soc_max", b.soc_max},
          {"degradation_cny_per_mwh", b.degradation_cny_per_mwh}};
}

json storage_json(const models::StorageParams& s) {
  return {{"capacity_nm3", s.capacity}, {"soc_min", s.soc_min}, {"soc_max", s.soc_max},
          {"rate_fraction", s.rate_fraction}};
}

}  // namespace

std::string to_json(const Scenario& sc) {
  json j;
  j["schema_version"] = 1;
  j["name"] = sc.name;
  if (!sc.note.empty()) j["note"] = sc.note;
  j["time"] = {{"weeks", sc.grid.weeks}, {"intervals_per_week", sc.grid.intervals_per_week},
               {"step_h", sc.grid.step_h}};
  j["market"] = {{"rho_max", sc.curve.rho_max}, {"k_am", sc.curve.k}};
  json carbon = {{"mechanism", market::to_string(sc.carbon.mechanism)},
                 {"q_allo_t", sc.carbon.q_allo_t},
                 {"q_rewa_t", sc.carbon.q_rewa_t}};
  if (sc.carbon.fixed_price) carbon["fixed_price"] = *sc.carbon.fixed_price;
  if (sc.grandfather) {
    carbon["grandfather"] = {{"emission_t_per_t", sc.grandfather->emission_t_per_t},
                             {"utilization", sc.grandfather->utilization},
                             {"reduction", sc.grandfather->reduction}};
    if (!sc.grandfather->shares.empty()) carbon["grandfather"]["shares"] = sc.grandfather->shares;
  }
  j["carbon"] = carbon;
  j["ga"] = json::array();
  for (const auto& g : sc.ga) {
    j["ga"].push_back({{"name", g.name},
                       {"asy", {{"capacity_tph", g.capacity_tph}, {"load_min", g.load_min}, {"load_max", g.load_max},
                                {"ramp_down", g.ramp_down}, {"ramp_up", g.ramp_up}}},
                       {"cost_cny_per_t", g.cost_cny_per_t},
                       {"emission_t_per_t", g.emission_t_per_t},
                       {"allowance_t", g.allowance_t},
                       {"participates", g.participates}});
  }
  const auto& R = sc.chain.rg;
  json rg;
  json buses = json::array(), branches = json::array();
  for (const auto& b : R.network.buses) buses.push_back({{"name", b.name}, {"v_min", b.v_min}, {"v_max", b.v_max}});
  for (const auto& b : R.network.branches) {
    branches.push_back({{"from", b.from}, {"to", b.to}, {"r", b.r}, {"x", b.x}});
  }
  rg["network"] = {{"buses", buses}, {"branches", branches}};
  auto units = [](const std::vector<models::RenewableUnit>& list) {
    json a = json::array();
    for (const auto& u : list) a.push_back({{"bus", u.bus}, {"capacity_mw", u.capacity_mw}});
    return a;
  };
  rg["wt"] = units(R.wt);
  rg["pv"] = units(R.pv);
  rg["bes"] = bes_json(R.bes);
  rg["bes"]["bus"] = R.bes_bus;
  rg["hp_bus"] = R.hp_bus;
  rg["ra_bus"] = R.ra_bus;
  rg["reactive_compensation"] = {{"enabled", R.reactive_compensation}, {"max_mvar", R.vc_max_mvar}};
  if (sc.synth) {
    const auto& s = *sc.synth;
    rg["profile"] = {{"synthetic",
                      {{"seed", s.seed}, {"wind_mean", s.wind_mean}, {"wind_volatility", s.wind_volatility},
                       {"wind_persistence", s.wind_persistence}, {"wind_floor", s.wind_floor},
                       {"pv_clearness_min", s.pv_clearness_min}, {"sunrise_h", s.sunrise_h},
                       {"sunset_h", s.sunset_h}}}};
  } else {
    rg["profile"] = {{"wt_mw", R.profile.wt_mw}, {"pv_mw", R.profile.pv_mw}};
  }
  j["rg"] = rg;

  const auto& H = sc.chain.hp;
  json nodes = json::array(), pipes = json::array();
  for (const auto& n : H.pipeline.nodes) nodes.push_back({{"name", n.name}, {"p_min", n.p_min}, {"p_max", n.p_max}});
  for (const auto& p : H.pipeline.pipes) {
    pipes.push_back({{"from", p.from}, {"to", p.to}, {"k_gf", p.k_gf}, {"k_lp", p.k_lp}});
  }
  j["hp"] = {{"ae", {{"capacity_mw", H.ae_capacity_mw}, {"eta_p2h", H.eta_p2h}, {"load_min", H.load_min},
                     {"load_max", H.load_max}}},
             {"eta_comp", H.eta_comp},
             {"hst", storage_json(H.hst)},
             {"bes", bes_json(H.bes)},
             {"pipeline", {{"nodes", nodes}, {"pipes", pipes}, {"source", H.pipeline.source},
                           {"sink", H.pipeline.sink}, {"depth", H.pipeline.depth},
                           {"pressure_penalty", H.pipeline.pressure_penalty}}}};
  const auto& A = sc.chain.ra;
  json ra = {{"asy", {{"capacity_tph", A.asy_capacity_tph}, {"load_min", A.load_min}, {"load_max", A.load_max},
                      {"ramp_down", A.ramp_down}, {"ramp_up", A.ramp_up}}},
             {"eta_h2a", A.eta_h2a},
             {"eta_p2a", A.eta_p2a},
             {"hst", storage_json(A.hst)},
             {"ast", {{"capacity_t", A.ast_capacity_t}}}};
  if (A.backup_price_profile.empty()) {
    ra["backup_price"] = A.backup_price;
  } else {
    ra["backup_price"] = A.backup_price_profile;
  }
  j["ra"] = ra;
  j["engine"] = {{"rho_ref", sc.engine.rho_ref}, {"multiplier_big_m", sc.engine.multiplier_big_m},
                 {"max_fixed_point", sc.engine.max_fixed_point}, {"jobs", sc.engine.jobs},
                 {"chain_lp_method", sc.engine.chain_lp_method}};
  j["solver"] = {{"backend", sc.solver.backend}, {"feasibility_tol", sc.solver.feasibility_tol},
                 {"optimality_tol", sc.solver.optimality_tol}, {"mip_rel_gap", sc.solver.mip_rel_gap},
                 {"time_limit", sc.solver.time_limit}, {"seed", sc.solver.random_seed},
                 {"lp_method", sc.solver.lp_method}};
  return j.dump(2) + "\n";
}

bool same_scenario(const Scenario& a, const Scenario& b) {
  return to_json(a) == to_json(b) && a.chain.rg.profile.wt_mw == b.chain.rg.profile.wt_mw &&
         a.chain.rg.profile.pv_mw == b.chain.rg.profile.pv_mw;
}

Scenario default_scenario() {
  Scenario sc;
  sc.name = "nine-bus synthetic";
  sc.note =
      "Capacities follow the published case study. Efficiencies, network data, storage fractions and the "
      "RES profile are illustrative, not from the paper.";
  models::GaParams ga;
  sc.ga = {ga};

  auto& R = sc.chain.rg;
  for (int b = 0; b < 9; ++b) R.network.buses.push_back({"bus" + std::to_string(b), 0.9025, 1.1025});
  const int edges[8][2] = {{0, 1}, {1, 2}, {2, 3}, {1, 4}, {4, 5}, {0, 6}, {6, 7}, {6, 8}};
  for (const auto& e : edges) R.network.branches.push_back({e[0], e[1], 0.002, 0.004});
  R.wt = {{3, 100.0}, {5, 100.0}, {7, 100.0}};
  R.pv = {{8, 100.0}};
  R.bes_bus = 1;
  R.bes.capacity_mwh = 150.0;
  R.hp_bus = 0;
  R.ra_bus = 0;
  sc.synth = SynthSpec{};
  sc.synth->wind_floor = 0.1;
  R.profile = synth_res(*sc.synth, sc.grid, R.wt_capacity(), R.pv_capacity());

  auto& H = sc.chain.hp;
  H.bes.capacity_mwh = 50.0;
  H.hst = {1.0e5, 0.05, 0.95, 0.5};
  H.pipeline.nodes = {{"plant", 1.0, 4.0}, {"junction", 1.0, 4.0}, {"synthesis", 1.0, 4.0}};
  H.pipeline.pipes = {{0, 1, 3.0e4, 5.0e3}, {1, 2, 3.0e4, 5.0e3}};
  H.pipeline.source = 0;
  H.pipeline.sink = 2;

  auto& A = sc.chain.ra;
  A.hst = {2.0e5, 0.05, 0.95, 0.5};

  sc.grandfather = GrandfatherSpec{};
  const Caps caps = grandfather_caps(*sc.grandfather, {ga.capacity_tph}, sc.grid, {ga.capacity_tph, A.asy_capacity_tph});
  sc.carbon.q_allo_t = caps.q_allo_t;
  sc.carbon.q_rewa_t = caps.q_rewa_t;
  sc.carbon.mechanism = market::Mechanism::kPcim;
  sc.ga[0].allowance_t = caps.q_allo_t;
  sc.validate();
  return sc;
}

}  // namespace carbamm::scenario
