#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "gridbargain/bargaining.hpp"
#include "gridbargain/io.hpp"
#include "json.hpp"

using namespace gridbargain;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kData = GRIDBARGAIN_DATA_DIR;
const std::string kCli = GRIDBARGAIN_CLI;
const std::string kW1 = (kData / "four_user" / "w1.json").string();
const std::string kDVec = "-61.33,481.18,101.48,-23.34";

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("gridbargain_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json read_json(const fs::path& p) { return json::parse(io::read_text(p)); }

// Arrays come through as is; objects keyed by user id give their values in key order.
std::vector<double> as_vector(const json& j) {
  if (j.is_array()) return j.get<std::vector<double>>();
  std::vector<double> v;
  for (const auto& [key, value] : j.items()) v.push_back(value.get<double>());
  return v;
}

}  // namespace

TEST_CASE("bargain with the published ideal costs") {
  const auto out = scratch("bargain");
  REQUIRE(run("bargain --d-vector=" + kDVec + " --jsoc 438.68 --sweep-steps 6 --out " + out.string()) == 0);
  const auto j = read_json(out / "bargain.json");
  CHECK(std::abs(j["ideal_discount"].get<double>() - 14.83) <= 0.01);
  const std::vector<double> printed = {-76.16, 466.36, 86.65, -38.16};
  const auto alloc = as_vector(j["ideal_allocation"]);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(alloc[i] - printed[i]) <= 0.01);
  CHECK(j["success"].get<bool>());
  CHECK(j["discount"].get<double>() == doctest::Approx(j["ideal_discount"].get<double>()));

  // Self-consistency: recompute from the report's own fields.
  const auto s = as_vector(j["selfish_costs"]);
  const auto ideal = as_vector(j["ideal_costs"]);
  const auto gamma = as_vector(j["gamma"]);
  const double jsoc = j["social_cost"].get<double>();
  const double eps = (std::accumulate(s.begin(), s.end(), 0.0) - jsoc) / 4;
  CHECK(std::abs(eps - j["discount"].get<double>()) <= 1e-9);
  const auto allocated = as_vector(j["allocated"]);
  CHECK(std::abs(std::accumulate(allocated.begin(), allocated.end(), 0.0) - jsoc) <= 1e-9);
  double rtot = 0;
  for (std::size_t i = 0; i < 4; ++i) rtot += gamma[i] * std::abs(ideal[i]);
  CHECK(std::abs(rtot - j["resilience"]["total_reduction"].get<double>()) <= 1e-9);

  // Every lattice row's success flag matches the predicate evaluated directly.
  const auto sweep = io::read_csv(out / "gamma_sweep.csv", true);
  CHECK(sweep.rows.size() == 6 * 6 * 6 * 6);
  const double eps0 = ideal_discount(ideal, jsoc);
  for (const auto& row : sweep.rows) {
    const std::vector<double> g(row.begin(), row.begin() + 4);
    double r = 0;
    for (std::size_t i = 0; i < 4; ++i) r += g[i] * std::abs(ideal[i]);
    const bool direct = r <= 4 * eps0 + 4e-9;
    CHECK((row.back() == 1.0) == direct);
  }
}

TEST_CASE("bargain exit codes") {
  const auto out = scratch("codes");
  CHECK(run("bargain --d-vector=" + kDVec + " --out " + out.string()) == 2);
  CHECK(run("bargain --d-vector=" + kDVec + " --jsoc 438.68 --gamma 0,0.2,0,0 --out " + out.string()) == 4);
  CHECK(run("bargain --d-vector=" + kDVec + " --jsoc 438.68 --gamma 0,-0.2,0,0 --out " + out.string()) == 2);
  CHECK(run("report --config " + (kData / "missing.json").string() + " --out " + out.string()) == 2);
}

TEST_CASE("forecast output stays inside the scenario envelope") {
  const auto out = scratch("forecast");
  REQUIRE(run("forecast --config " + kW1 + " --out " + out.string()) == 0);
  const auto cfg = io::load_config(kW1);
  for (const auto& src : cfg.scenarios) {
    const auto pool = io::load_scenarios(src.path);
    const auto f = io::read_csv(out / ("forecast_" + src.user + ".csv"), true);
    REQUIRE(f.rows.size() == 24);
    for (std::size_t t = 0; t < 24; ++t) {
      double lo = 1e300, hi = -1e300;
      for (const auto& p : pool) lo = std::min(lo, p[t]), hi = std::max(hi, p[t]);
      CHECK(f.rows[t][1] >= lo - 1e-8);
      CHECK(f.rows[t][1] <= hi + 1e-8);
    }
  }
}

TEST_CASE("report is reproducible byte for byte and self-consistent") {
  const auto a = scratch("rep_a");
  const auto b = scratch("rep_b");
  REQUIRE(run("report --config " + kW1 + " --samples 20000 --out " + a.string()) == 0);
  REQUIRE(run("report --config " + kW1 + " --samples 20000 --out " + b.string()) == 0);
  CHECK(io::read_text(a / "report.json") == io::read_text(b / "report.json"));
  CHECK(io::read_text(a / "schedule.csv") == io::read_text(b / "schedule.csv"));
  CHECK(fs::exists(a / "timings.json"));

  const auto j = read_json(a / "report.json");
  const auto& bar = j["bargaining"];
  const double jsoc = j["schedule"]["social_cost"].get<double>();
  CHECK(bar["social_cost"].get<double>() == jsoc);
  const auto ideal = as_vector(j["schedule"]["ideal_costs"]);
  CHECK(std::accumulate(ideal.begin(), ideal.end(), 0.0) >= jsoc - 1e-6);
  const auto s = as_vector(bar["selfish_costs"]);
  CHECK(std::abs((std::accumulate(s.begin(), s.end(), 0.0) - jsoc) / 4 - bar["discount"].get<double>()) <= 1e-9);
  CHECK(j.contains("monte_carlo"));
}

TEST_CASE("centralized cost equals the oracle reported by a distributed run") {
  const auto c = scratch("central");
  const auto d = scratch("distributed");
  REQUIRE(run("schedule --config " + kW1 + " --solver centralized --out " + c.string()) == 0);
  REQUIRE(run("schedule --config " + kW1 + " --solver distributed --verify-oracle --log-messages " +
              (d / "messages.jsonl").string() + " --out " + d.string()) == 0);
  const auto jc = read_json(c / "schedule.json");
  const auto jd = read_json(d / "schedule.json");
  CHECK(std::abs(jc["social_cost"].get<double>() - jd["oracle"]["other_solver_cost"].get<double>()) <= 1e-6);
  const double gap = jd["oracle"]["cost_gap"].get<double>();
  CHECK(std::abs(gap) <= std::max(0.1, 1e-3 * std::abs(jc["social_cost"].get<double>())));

  std::ifstream log(d / "messages.jsonl");
  const auto audit = audit_message_log(log, 24, 5);
  CHECK(audit.messages == jd["distributed"]["messages"].get<std::uint64_t>());
  CHECK(audit.clean());
}

TEST_CASE("zero-demand model schedules at zero cost") {
  const auto dir = scratch("zero_model");
  fs::create_directories(dir);
  for (const auto& f : fs::directory_iterator(kData / "four_user")) {
    fs::copy_file(f.path(), dir / f.path().filename());
  }
  auto m = io::load_model(dir / "model.json");
  for (auto& d : m.demands) std::fill(d.begin(), d.end(), 0.0);
  for (auto& u : m.users) {
    if (u.desd) u.desd->initial_kwh = u.desd->min_kwh;
  }
  // A flat tariff removes any arbitrage the batteries could otherwise earn.
  std::fill(m.prices.buy.begin(), m.prices.buy.end(), 10.0);
  std::fill(m.prices.sell.begin(), m.prices.sell.end(), 8.0);
  io::save_model(m, dir);
  // Empty every scenario pool so RG is zero too.
  for (const auto& name : {"pv_u1.csv", "wt_u3.csv", "pv_u4.csv"}) {
    auto pool = io::load_scenarios(dir / name);
    for (auto& p : pool) std::fill(p.begin(), p.end(), 0.0);
    io::save_scenarios(dir / name, pool);
  }
  const auto out = scratch("zero_out");
  REQUIRE(run("schedule --config " + (dir / "w1.json").string() + " --out " + out.string()) == 0);
  CHECK(std::abs(read_json(out / "schedule.json")["social_cost"].get<double>()) <= 1e-6);
}

TEST_CASE("missing scenario file names the path") {
  const auto dir = scratch("missing_scen");
  fs::create_directories(dir);
  for (const auto& f : fs::directory_iterator(kData / "four_user")) {
    if (f.path().filename() != "wt_u3.csv") fs::copy_file(f.path(), dir / f.path().filename());
  }
  const std::string cmd = kCli + " schedule --config " + (dir / "w1.json").string() + " --out " +
                          (dir / "out").string() + " 2>&1";
  std::string text;
  if (FILE* p = ::popen(cmd.c_str(), "r")) {
    char buf[512];
    while (std::fgets(buf, sizeof buf, p)) text += buf;
    const int status = ::pclose(p);
    CHECK(WEXITSTATUS(status) == 2);
  }
  CHECK(text.find("wt_u3.csv") != std::string::npos);
}
