#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "carbamm/scenario/scenario.hpp"

using namespace carbamm;
using namespace carbamm::scenario;
using json = nlohmann::ordered_json;

namespace {

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int line_of(const std::string& text, const std::string& needle) {
  const auto pos = text.find(needle);
  REQUIRE(pos != std::string::npos);
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
}

std::string replace_once(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

std::string parse_error(const std::string& text) {
  try {
    parse_scenario(text, "s.json");
  } catch (const ScenarioError& e) {
    return e.what();
  }
  FAIL("no error");
  return {};
}

}  // namespace

TEST_CASE("grandfathered caps") {
  GrandfatherSpec g;
  models::TimeGrid grid;
  const auto c = grandfather_caps(g, {78.3}, grid, {78.3, 15.66});
  CHECK(c.total_t == doctest::Approx(413416.4832).epsilon(1e-12));
  CHECK(c.q_allo_t == doctest::Approx(344513.736).epsilon(1e-9));
  CHECK(c.q_rewa_t == doctest::Approx(68902.7472).epsilon(1e-9));
  CHECK(c.q_allo_t / c.q_rewa_t == doctest::Approx(5.0));

  CHECK_THROWS_AS(grandfather_caps(g, {78.3}, grid, {1.0}), ScenarioError);
  CHECK_THROWS_AS(grandfather_caps(g, {0.0}, grid, {1.0, 1.0}), ScenarioError);
  g.utilization = 1.5;
  CHECK_THROWS_AS(grandfather_caps(g, {78.3}, grid, {1.0, 1.0}), ScenarioError);
}

TEST_CASE("shipped default scenario matches the built-in one") {
  const auto shipped = load_scenario(std::filesystem::path(CARBAMM_SOURCE_DIR) / "data/default.scenario.json");
  const auto builtin = default_scenario();
  CHECK(same_scenario(shipped, builtin));
  CHECK(to_json(shipped) == to_json(builtin));
  CHECK(builtin.carbon.q_rewa_t == doctest::Approx(68902.7472));
  CHECK(builtin.participants() == std::vector<int>{0});
}

TEST_CASE("scenario JSON round trip") {
  auto sc = default_scenario();
  sc.name = "round trip";
  sc.engine.jobs = 3;
  sc.carbon.mechanism = market::Mechanism::kM3;
  sc.carbon.fixed_price = 75.0;
  const auto text = to_json(sc);
  const auto back = parse_scenario(text);
  CHECK(same_scenario(sc, back));
  CHECK(to_json(back) == text);
}

TEST_CASE("grandfather block fills missing caps") {
  auto j = json::parse(to_json(default_scenario()));
  j["carbon"].erase("q_allo_t");
  j["carbon"].erase("q_rewa_t");
  for (auto& g : j["ga"]) g.erase("allowance_t");
  const auto sc = parse_scenario(j.dump(2));
  CHECK(sc.carbon.q_allo_t == doctest::Approx(344513.736));
  CHECK(sc.carbon.q_rewa_t == doctest::Approx(68902.7472));
  CHECK(sc.ga[0].allowance_t == doctest::Approx(344513.736));

  j["carbon"].erase("grandfather");
  CHECK(parse_error(j.dump(2)).find("grandfather block") != std::string::npos);
}

TEST_CASE("parse errors name the line and the field") {
  const auto text = to_json(default_scenario());

  const auto unknown = replace_once(text, "\"k_am\"", "\"k_amm\"");
  auto msg = parse_error(unknown);
  CHECK(msg.rfind("s.json:" + std::to_string(line_of(unknown, "\"k_amm\"")) + ": ", 0) == 0);
  CHECK(msg.find("unknown field") != std::string::npos);
  CHECK(msg.find("k_amm") != std::string::npos);

  const auto wrong_type = replace_once(text, "\"rho_max\": 2900.0", "\"rho_max\": \"high\"");
  msg = parse_error(wrong_type);
  CHECK(msg.rfind("s.json:" + std::to_string(line_of(wrong_type, "\"high\"")) + ": ", 0) == 0);
  CHECK(msg.find("must be a number") != std::string::npos);

  auto j = json::parse(text);
  j["market"].erase("rho_max");
  j["market"].erase("k_am");
  CHECK_NOTHROW(parse_scenario(j.dump(2)));
  j.erase("market");
  CHECK(parse_error(j.dump(2)).find("missing field 'market'") != std::string::npos);

  CHECK(parse_error("{\"schema_version\": 2}").find("schema_version") != std::string::npos);
  CHECK(parse_error("{ not json").rfind("s.json", 0) == 0);
}

TEST_CASE("semantic validation") {
  auto j = json::parse(to_json(default_scenario()));
  j["time"]["weeks"] = 0;
  CHECK_THROWS_AS(parse_scenario(j.dump(2)), ScenarioError);

  j = json::parse(to_json(default_scenario()));
  j["ga"].push_back(j["ga"][0]);
  CHECK(parse_error(j.dump(2)).find("duplicate GA name") != std::string::npos);

  j = json::parse(to_json(default_scenario()));
  j["carbon"]["mechanism"] = "m3";
  CHECK(parse_error(j.dump(2)).find("fixed carbon price") != std::string::npos);

  j = json::parse(to_json(default_scenario()));
  j["engine"]["jobs"] = 0;
  CHECK_THROWS_AS(parse_scenario(j.dump(2)), ScenarioError);
}

TEST_CASE("synthetic profile is deterministic and bounded") {
  SynthSpec s;
  models::TimeGrid grid;
  const auto a = synth_res(s, grid, 200.0, 100.0);
  const auto b = synth_res(s, grid, 200.0, 100.0);
  CHECK(a.wt_mw == b.wt_mw);
  CHECK(a.pv_mw == b.pv_mw);
  REQUIRE(a.wt_mw.size() == static_cast<std::size_t>(grid.intervals()));
  double wsum = 0.0;
  for (int t = 0; t < grid.intervals(); ++t) {
    CHECK(a.wt_mw[t] >= 0.0);
    CHECK(a.wt_mw[t] <= 200.0);
    CHECK(a.pv_mw[t] >= 0.0);
    CHECK(a.pv_mw[t] <= 100.0);
    const double hour = t % 24;
    if (hour <= s.sunrise_h || hour >= s.sunset_h) CHECK(a.pv_mw[t] == 0.0);
    wsum += a.wt_mw[t];
  }
  CHECK(wsum / grid.intervals() / 200.0 == doctest::Approx(s.wind_mean).epsilon(0.25));

  s.seed = 43;
  CHECK(synth_res(s, grid, 200.0, 100.0).wt_mw != a.wt_mw);
}

TEST_CASE("CSV profiles") {
  const auto dir = std::filesystem::temp_directory_path() / "carbamm_test_scenario";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "ok.csv") << "wt_mw,pv_mw\n1.5,0\n2,3.25\n";
    std::ofstream(dir / "bad.csv") << "wt_mw,pv_mw\n1,2\n3\n";
  }
  const auto p = load_profile_csv(dir / "ok.csv");
  CHECK(p.wt_mw == std::vector<double>{1.5, 2.0});
  CHECK(p.pv_mw == std::vector<double>{0.0, 3.25});
  try {
    load_profile_csv(dir / "bad.csv");
    FAIL("no error");
  } catch (const ScenarioError& e) {
    CHECK(std::string(e.what()).find("bad.csv:3:") != std::string::npos);
  }
  CHECK_THROWS_AS(load_profile_csv(dir / "missing.csv"), ScenarioError);

  // A relative profile path resolves against the scenario file.
  auto j = json::parse(to_json(default_scenario()));
  j["time"] = {{"weeks", 1}, {"intervals_per_week", 2}, {"step_h", 1.0}};
  j["rg"]["profile"] = {{"csv", "ok.csv"}};
  {
    std::ofstream(dir / "s.json") << j.dump(2);
  }
  try {
    const auto sc = load_scenario(dir / "s.json");
    CHECK(sc.chain.rg.profile.pv_mw[1] == 3.25);
    CHECK_FALSE(sc.synth.has_value());
  } catch (const ScenarioError& e) {
    FAIL(e.what());
  }
  std::filesystem::remove_all(dir);
}
