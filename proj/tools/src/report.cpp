#include "report.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace carbamm::cli {

using nlohmann::ordered_json;

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string Manifest::id() const {
  ordered_json j;
  j["command"] = command;
  j["options"] = options;
  j["scenario_sha256"] = scenario_sha256;
  j["mechanism"] = mechanism;
  j["seed"] = seed ? ordered_json(*seed) : ordered_json(nullptr);
  j["version"] = version;
  return sha256_hex(j.dump());
}

ordered_json Manifest::to_json() const {
  ordered_json j;
  j["id"] = id();
  j["command"] = command;
  j["options"] = options;
  j["arguments"] = arguments;
  j["scenario"] = {{"path", scenario_path}, {"sha256", scenario_sha256}};
  j["mechanism"] = mechanism;
  j["seed"] = seed ? ordered_json(*seed) : ordered_json(nullptr);
  j["version"] = version;
  ordered_json t = ordered_json::object();
  for (const auto& [k, v] : timings) t[k] = v;
  j["timings_s"] = t;
  return j;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";  // folds -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

CsvTable& CsvTable::column(std::string name, std::string unit) {
  names_.push_back(std::move(name));
  units_.push_back(std::move(unit));
  return *this;
}

void CsvTable::add_row(std::vector<Cell> cells) {
  if (cells.size() != names_.size()) {
    throw std::logic_error("csv row has " + std::to_string(cells.size()) + " cells, expected " +
                           std::to_string(names_.size()));
  }
  rows_.push_back(std::move(cells));
}

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void join(std::string& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += quote(cells[i]);
  }
  out += '\n';
}

}  // namespace

std::string CsvTable::render(const std::string& manifest_id) const {
  std::string out;
  join(out, names_);
  join(out, units_);
  for (const auto& row : rows_) {
    std::vector<std::string> cells;
    for (const auto& c : row) {
      cells.push_back(std::holds_alternative<double>(c) ? format_number(std::get<double>(c)) : std::get<std::string>(c));
    }
    join(out, cells);
  }
  for (const auto& n : notes_) out += "# " + n + "\n";
  out += "# manifest: " + manifest_id + "\n";
  return out;
}

namespace {

ordered_json residuals_json(const ir::KktResiduals& r) {
  return {{"stationarity", r.stationarity},
          {"primal_equality", r.primal_equality},
          {"primal_inequality", r.primal_inequality},
          {"complementarity", r.complementarity},
          {"dual_sign", r.dual_sign}};
}

std::string yes_no(bool b) { return b ? "yes" : "no"; }

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

ordered_json result_json(const equilibrium::EquilibriumResult& r) {
  ordered_json j;
  j["scenario"] = r.scenario;
  j["certified"] = r.certified();
  j["issues"] = r.issues;
  j["carbon"] = {{"mechanism", market::to_string(r.carbon.mechanism)},
                 {"q_allo_t", r.carbon.q_allo_t},
                 {"q_rewa_t", r.carbon.q_rewa_t},
                 {"fixed_price", r.carbon.fixed_price ? ordered_json(*r.carbon.fixed_price) : ordered_json(nullptr)}};
  j["revenues_cny"] = {{"rep2a", r.revenues.rep2a()}, {"rg", r.revenues.rg},       {"hp", r.revenues.hp},
                       {"ra", r.revenues.ra},         {"carbon", r.revenues.carbon}, {"ga", r.revenues.ga}};
  j["aggregates"] = {{"green_yield_t", r.green_yield_t},
                     {"gray_yield_t", r.gray_yield_t},
                     {"emissions_t", r.emissions_t},
                     {"average_ammonia_price", r.average_ammonia_price},
                     {"ga_utilization", r.ga_utilization},
                     {"ra_utilization", r.ra_utilization},
                     {"inner_residual", r.inner_residual},
                     {"yield_mismatch", r.yield_mismatch},
                     {"fixed_point_iterations", r.fixed_point_iterations}};
  const auto& o = r.outer;
  ordered_json players = ordered_json::array();
  for (const auto& p : o.players) players.push_back({{"name", p.name}, {"residuals", residuals_json(p.residuals)}});
  ordered_json flags = ordered_json::array();
  for (const auto& f : o.big_m_flags) {
    flags.push_back({{"label", f.label}, {"on_slack", f.on_slack}, {"value", f.value}, {"big_m", f.big_m}});
  }
  j["outer"] = {{"ammonia_price", o.ammonia_price},
                {"carbon_price", o.carbon_price},
                {"q_all_t", o.q_all_t},
                {"ga_sales_t", o.ga_sales_t},
                {"ga_purchase_t", o.ga_purchase_t},
                {"ra_sales_t", o.ra_sales_t},
                {"ast_t", o.ast_t},
                {"ammonia_value", o.ammonia_value},
                {"yield_t", o.yield_t},
                {"ga_market_revenue", o.ga_market_revenue},
                {"ra_market_revenue", o.ra_market_revenue},
                {"carbon_price_at_bound", o.carbon_price_at_bound},
                {"multiplier_big_m", o.multiplier_big_m},
                {"max_residual", o.max_residual()},
                {"players", players},
                {"big_m_flags", flags},
                {"binaries", o.binaries},
                {"x", o.x},
                {"nodes", o.nodes}};
  ordered_json inner = ordered_json::array();
  for (const auto& w : r.inner) {
    inner.push_back({{"week", w.week},
                     {"ammonia_value", w.ammonia_value},
                     {"yield_t", w.yield_t},
                     {"objective", w.objective},
                     {"residual", w.residual},
                     {"x", w.x},
                     {"row_dual", w.row_dual}});
  }
  j["inner"] = inner;
  j["prices"] = {{"e_hp_cny_per_mwh", r.prices.e_hp}, {"e_ra_cny_per_mwh", r.prices.e_ra}, {"h2_cny_per_nm3", r.prices.h2}};
  j["degenerate_intervals"] = r.degenerate_intervals;
  j["timings_s"] = {{"sp", r.timings.sp}, {"outer", r.timings.outer}, {"inner", r.timings.inner}, {"verify", r.timings.verify}};
  return j;
}

CsvTable summary_table(const std::vector<std::pair<std::string, const equilibrium::EquilibriumResult*>>& results) {
  CsvTable t;
  t.column("case", "-")
      .column("mechanism", "-")
      .column("rep2a_revenue", "CNY")
      .column("rg_revenue", "CNY")
      .column("hp_revenue", "CNY")
      .column("ra_revenue", "CNY")
      .column("carbon_revenue", "CNY")
      .column("ga_revenue", "CNY")
      .column("ca_traded", "t")
      .column("ca_price", "CNY/t")
      .column("green_yield", "t")
      .column("gray_yield", "t")
      .column("average_ammonia_price", "CNY/t")
      .column("emissions", "t")
      .column("ga_utilization", "-")
      .column("ra_utilization", "-")
      .column("certified", "-");
  for (const auto& [label, r] : results) {
    t.add_row({label, market::to_string(r->carbon.mechanism), r->revenues.rep2a(), r->revenues.rg, r->revenues.hp,
               r->revenues.ra, r->revenues.carbon, r->revenues.ga_total(), r->outer.q_all_t, r->outer.carbon_price,
               r->green_yield_t, r->gray_yield_t, r->average_ammonia_price, r->emissions_t, mean(r->ga_utilization),
               r->ra_utilization, yes_no(r->certified())});
  }
  return t;
}

CsvTable prices_table(const equilibrium::EquilibriumResult& r, const models::TimeGrid& g) {
  CsvTable t;
  t.column("interval", "-")
      .column("week", "-")
      .column("hour", "h")
      .column("e_hp", "CNY/MWh")
      .column("e_ra", "CNY/MWh")
      .column("h2", "CNY/Nm3")
      .column("ammonia_price", "CNY/t");
  const auto at = [](const std::vector<double>& v, int i) {
    return i < static_cast<int>(v.size()) ? v[i] : std::nan("");
  };
  for (int i = 0; i < g.intervals(); ++i) {
    const int w = i / g.intervals_per_week;
    t.add_row({static_cast<double>(i), static_cast<double>(w), (i % g.intervals_per_week) * g.step_h,
               at(r.prices.e_hp, i), at(r.prices.e_ra, i), at(r.prices.h2, i), at(r.outer.ammonia_price, w)});
  }
  return t;
}

CsvTable allocation_table(const allocation::AllocationInput& in,
                          const std::vector<allocation::AllocationResult>& results) {
  CsvTable t;
  t.column("scheme", "-");
  for (const char* k : allocation::kStakeholderNames) t.column(std::string("q_") + k, "t");
  for (const char* k : allocation::kStakeholderNames) t.column(std::string(k) + "_revenue", "CNY");
  for (const char* k : allocation::kStakeholderNames) t.column(std::string(k) + "_change", "%");
  for (const char* k : allocation::kStakeholderNames) t.column(std::string(k) + "_ir", "-");
  t.column("delta_sum", "-").column("feasible", "-");

  std::vector<Cell> base{std::string("baseline")};
  for (int k = 0; k < 3; ++k) base.push_back(0.0);
  for (int k = 0; k < 3; ++k) base.push_back(in.baseline[k]);
  for (int k = 0; k < 3; ++k) base.push_back(0.0);
  for (int k = 0; k < 3; ++k) base.push_back(std::string("yes"));
  base.push_back(0.0);
  base.push_back(std::string("yes"));
  t.add_row(std::move(base));

  for (const auto& r : results) {
    std::vector<Cell> row{r.scheme};
    for (int k = 0; k < 3; ++k) row.push_back(r.q_t[k]);
    for (int k = 0; k < 3; ++k) row.push_back(r.allocated[k]);
    for (int k = 0; k < 3; ++k) row.push_back(100.0 * r.delta_j[k]);
    for (int k = 0; k < 3; ++k) row.push_back(yes_no(r.ir[k]));
    row.push_back(r.delta_sum);
    row.push_back(yes_no(r.feasible));
    t.add_row(std::move(row));
  }
  t.note("traded " + format_number(in.q_all_t) + " t at " + format_number(in.carbon_price) + " CNY/t");
  return t;
}

CsvTable perturbation_table(const allocation::PerturbationReport& rep) {
  CsvTable t;
  t.column("volume", "t")
      .column("applied_volume", "t")
      .column("ca_price", "CNY/t")
      .column("rep2a_revenue", "CNY")
      .column("rg_revenue", "CNY")
      .column("hp_revenue", "CNY")
      .column("ra_revenue", "CNY")
      .column("error", "-");
  const double nan = std::nan("");
  for (const auto& r : rep.rows) {
    const bool ok = r.error.empty();
    t.add_row({r.volume_t, r.applied_t, ok ? r.carbon_price : nan, ok ? r.rep2a_total : nan,
               ok ? r.allocation.allocated[0] : nan, ok ? r.allocation.allocated[1] : nan,
               ok ? r.allocation.allocated[2] : nan, r.error});
  }
  const char* cols[4] = {"rep2a_revenue", "rg_revenue", "hp_revenue", "ra_revenue"};
  for (int c = 0; c < 4; ++c) {
    t.note(std::string("verdict ") + cols[c] + ": " + (rep.nondecreasing[c] ? "nondecreasing" : "not nondecreasing"));
  }
  return t;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace carbamm::cli
