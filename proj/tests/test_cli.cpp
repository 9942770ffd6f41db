#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "commands.hpp"
#include "report.hpp"

using namespace carbamm;
using namespace carbamm::cli;
namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const fs::path kTiny = fs::path(CARBAMM_TEST_DATA) / "tiny.scenario.json";

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("carbamm_cli_" + name);
  fs::remove_all(p);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = std::string("\"") + CARBAMM_BIN + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("ranges and lists") {
  CHECK(parse_range("0:100:25") == std::vector<double>{0, 25, 50, 75, 100});
  CHECK(parse_range("1:2:0.3").size() == 4);
  CHECK(parse_range("5:5:1") == std::vector<double>{5});
  CHECK_THROWS_AS(parse_range("5:1:1"), UsageError);
  CHECK_THROWS_AS(parse_range("0:1:0"), UsageError);
  CHECK_THROWS_AS(parse_range("0:1"), UsageError);
  CHECK_THROWS_AS(parse_range("a:b:c"), UsageError);
  CHECK(parse_list("9000,19000") == std::vector<double>{9000, 19000});
  CHECK(parse_list("1,3:5:1") == std::vector<double>{1, 3, 4, 5});
  CHECK_THROWS_AS(parse_list(""), UsageError);
}

TEST_CASE("number formatting") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(-0.0) == "0");
  CHECK(format_number(1234567.891) == "1234567.89");
  CHECK(format_number(1e-12) == "1e-12");
  CHECK(format_number(std::nan("")) == "nan");
  CHECK(format_number(-INFINITY) == "-inf");
}

TEST_CASE("sha256 of a known vector") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("").substr(0, 16) == "e3b0c44298fc1c14");
}

TEST_CASE("CSV layout") {
  CsvTable t;
  t.column("case", "-").column("price", "CNY/t");
  t.add_row({std::string("a"), 1.5});
  t.add_row({std::string("b"), 2.0});
  t.note("two rows");
  CHECK(t.rows() == 2);
  CHECK(t.render("abc") == "case,price\n-,CNY/t\na,1.5\nb,2\n# two rows\n# manifest: abc\n");
  CHECK_THROWS(t.add_row({1.0}));
}

TEST_CASE("manifest id covers inputs only") {
  Manifest m;
  m.command = "solve";
  m.scenario_sha256 = sha256_hex("x");
  m.mechanism = "pcim";
  m.version = "0.1.0";
  const auto id = m.id();
  CHECK(id.size() == 64);
  m.timings["sp"] = 3.0;
  m.arguments = {"solve", "--out", "elsewhere"};
  CHECK(m.id() == id);
  m.seed = 7;
  CHECK(m.id() != id);
  m.seed.reset();
  m.options["fixed_price"] = "60";
  CHECK(m.id() != id);
  const auto j = m.to_json();
  CHECK(j["id"] == m.id());
  CHECK(j["timings_s"]["sp"] == 3.0);
}

TEST_CASE("exit codes") {
  const auto out = scratch("codes");
  CHECK(run("") == kUsage);
  CHECK(run("--version") == kOk);
  CHECK(run("solve --help") == kOk);
  CHECK(run("frobnicate") == kUsage);
  CHECK(run("solve --mechanism m3 --out " + out.string()) == kUsage);
  CHECK(run("solve --mechanism m2 --fixed-price 50 --out " + out.string()) == kUsage);
  CHECK(run("solve --scenario /nonexistent.json --out " + out.string()) == kUsage);
  CHECK(run("sweep --param fixed-carbon-price --range 5:1:1 --out " + out.string()) == kUsage);
  CHECK(run("sweep --param nonsense --range 1:2:1 --out " + out.string()) == kUsage);
  CHECK(run("perturb-ir --volumes 80000 --out " + out.string()) == kUsage);
  CHECK(run("allocate --cam cam1:xx --out " + out.string()) == kUsage);
  CHECK_FALSE(fs::exists(out / "equilibrium.json"));
  fs::remove_all(out);
}

TEST_CASE("solver override from the environment") {
  const auto out = scratch("env");
  const std::string cmd = "CARBAMM_SOLVER=nosuch \"" + std::string(CARBAMM_BIN) + "\" solve --scenario " +
                          kTiny.string() + " --out " + out.string() + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == kUsage);
  fs::remove_all(out);
}

TEST_CASE("solve on a small scenario writes consistent reports") {
  const auto out = scratch("solve");
  REQUIRE(run("solve --scenario " + kTiny.string() + " --out " + out.string()) == kOk);
  for (const char* f : {"equilibrium.json", "summary.csv", "prices.csv", "manifest.json"}) {
    CHECK(fs::exists(out / f));
  }
  const auto eq = nlohmann::json::parse(read_text(out / "equilibrium.json"));
  const auto manifest = nlohmann::json::parse(read_text(out / "manifest.json"));
  const auto summary_text = read_text(out / "summary.csv");
  const auto rows = csv_rows(summary_text);
  REQUIRE(rows.size() == 3);
  const auto& head = rows[0];
  auto cell = [&](const std::string& name) {
    const auto it = std::find(head.begin(), head.end(), name);
    REQUIRE(it != head.end());
    return rows[2][static_cast<std::size_t>(it - head.begin())];
  };
  CHECK(std::stod(cell("rep2a_revenue")) == doctest::Approx(eq["revenues_cny"]["rep2a"].get<double>()).epsilon(1e-8));
  CHECK(std::stod(cell("rg_revenue")) == doctest::Approx(eq["revenues_cny"]["rg"].get<double>()).epsilon(1e-8));
  CHECK(std::stod(cell("ca_price")) == doctest::Approx(eq["outer"]["carbon_price"].get<double>()).epsilon(1e-8));
  CHECK(std::stod(cell("ca_traded")) == doctest::Approx(eq["outer"]["q_all_t"].get<double>()).epsilon(1e-8));
  CHECK(cell("certified") == "yes");
  CHECK(eq["certified"] == true);
  CHECK(eq["verification"]["max_improvement"].get<double>() <= 1e-6);
  CHECK(summary_text.find("# manifest: " + manifest["id"].get<std::string>()) != std::string::npos);

  const double rev = eq["revenues_cny"]["rg"].get<double>() + eq["revenues_cny"]["hp"].get<double>() +
                     eq["revenues_cny"]["ra"].get<double>() + eq["revenues_cny"]["carbon"].get<double>();
  CHECK(eq["revenues_cny"]["rep2a"].get<double>() == doctest::Approx(rev).epsilon(1e-9));

  const auto prices = csv_rows(read_text(out / "prices.csv"));
  CHECK(prices.size() == 2 + 48);

  // A second run in another directory gives byte-identical tables.
  const auto again = scratch("solve2");
  REQUIRE(run("solve --scenario " + kTiny.string() + " --out " + again.string()) == kOk);
  CHECK(read_text(again / "summary.csv") == summary_text);
  CHECK(read_text(again / "prices.csv") == read_text(out / "prices.csv"));
  fs::remove_all(out);
  fs::remove_all(again);
}

TEST_CASE("fixed-price sweep on a small scenario") {
  const auto out = scratch("sweep");
  REQUIRE(run("sweep --scenario " + kTiny.string() + " --param fixed-carbon-price --range 0:200:100 --out " +
              out.string()) == kOk);
  const auto rows = csv_rows(read_text(out / "sweep.csv"));
  CHECK(rows.size() == 2 + 3);
  CHECK(fs::exists(out / "fig8.csv"));
  fs::remove_all(out);
}

TEST_CASE("allocation on a small scenario") {
  const auto out = scratch("alloc");
  const int rc = run("allocate --scenario " + kTiny.string() + " --cam cam2 --out " + out.string());
  CHECK((rc == kOk || rc == kCertification));
  const auto rows = csv_rows(read_text(out / "allocation.csv"));
  CHECK(rows.size() >= 4);
  fs::remove_all(out);
}

TEST_CASE("scenario loading through the command layer") {
  CommonArgs a;
  a.scenario = kTiny.string();
  a.seed = 5;
  a.jobs = 2;
  const auto s = load(a);
  CHECK(s.sha256.size() == 64);
  CHECK(s.scenario.engine.jobs == 2);
  CHECK(s.scenario.solver.random_seed == 5);
  CHECK(s.scenario.synth->seed == 5);

  CommonArgs b;
  const auto d = load(b);
  CHECK(d.path == "<builtin>");
  CHECK(d.sha256 == sha256_hex(scenario::to_json(scenario::default_scenario())));
}
