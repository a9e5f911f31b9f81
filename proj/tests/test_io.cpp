#include <filesystem>
#include <fstream>
#include <functional>
#include <unistd.h>

#include "doctest.h"
#include "gridbargain/error.hpp"
#include "gridbargain/io.hpp"
#include "gridbargain/synthetic.hpp"
#include "json.hpp"

using namespace gridbargain;
namespace fs = std::filesystem;

namespace {

const fs::path kData = GRIDBARGAIN_DATA_DIR;

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("gridbargain_io_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ErrorCode code_of_config(const fs::path& path) {
  try {
    io::load_config(path);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("config accepted");
  return ErrorCode::BargainingFailed;
}

// Copies the shipped W1 experiment next to the fixture files with one edit.
fs::path edited_config(const std::string& name, const std::function<void(nlohmann::json&)>& edit) {
  auto j = nlohmann::json::parse(io::read_text(kData / "four_user" / "w1.json"));
  edit(j);
  const auto dir = scratch(name);
  for (const auto& f : fs::directory_iterator(kData / "four_user")) {
    fs::copy_file(f.path(), dir / f.path().filename());
  }
  io::write_text(dir / "cfg.json", j.dump());
  return dir / "cfg.json";
}

}  // namespace

TEST_CASE("numbers render with 9 significant digits") {
  CHECK(io::format_number(14.8275) == "14.8275");
  CHECK(io::format_number(1.0 / 3.0) == "0.333333333");
  CHECK(io::format_number(-0.0) == "0");
  CHECK(io::format_number(123456789012.0) == "1.23456789e+11");
}

TEST_CASE("csv round trip") {
  const auto dir = scratch("csv");
  io::write_csv(dir / "a.csv", {"x", "y"}, {{1.5, -2}, {3, 4.25}});
  CHECK(io::read_text(dir / "a.csv") == "x,y\n1.5,-2\n3,4.25\n");
  const auto t = io::read_csv(dir / "a.csv", true);
  CHECK(t.header == std::vector<std::string>{"x", "y"});
  CHECK(t.rows[1][1] == 4.25);
  try {
    io::read_csv(dir / "missing.csv", true);
    FAIL("read a missing file");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FileError);
    CHECK(std::string(e.what()).find("missing.csv") != std::string::npos);
  }
}

TEST_CASE("model save and load round trip") {
  const auto dir = scratch("model");
  const auto m = validate_model(synthetic::four_user_model());
  io::save_model(m, dir);
  const auto back = io::load_model(dir / "model.json");
  CHECK(back.user_count() == 4);
  CHECK(back.horizon.steps == m.horizon.steps);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(back.users[i].id == m.users[i].id);
    for (std::size_t t = 0; t < m.horizon.steps; ++t) {
      CHECK(back.demands[i][t] == doctest::Approx(m.demands[i][t]).epsilon(1e-8));
    }
  }
  CHECK(back.users[0].desd->efficiency == 0.9);
  CHECK(back.graph.connected());
}

TEST_CASE("shipped fixtures load") {
  const auto m = io::load_model(kData / "four_user" / "model.json");
  CHECK(m.user_count() == 4);
  const auto cfg = io::load_config(kData / "four_user" / "w1.json");
  CHECK(cfg.scenarios.size() == 3);
  CHECK(cfg.forecast.solar == std::vector<double>{0.8, 0.2, 0.0});
  CHECK(cfg.honest == std::vector<std::string>{"u1"});
  const auto pool = io::load_scenarios(cfg.scenarios[0].path);
  CHECK(pool.size() == 365);
  CHECK(pool[0].size() == 24);
}

TEST_CASE("config validation") {
  CHECK(code_of_config(kData / "four_user" / "nope.json") == ErrorCode::FileError);
  CHECK(code_of_config(edited_config("fc", [](auto& j) { j["forecast"]["solar"] = {0.5, 0.3, 0.1}; })) ==
        ErrorCode::InvariantViolation);
  CHECK(code_of_config(edited_config("gamma", [](auto& j) { j["gamma"] = {0, -1, 0, 0}; })) ==
        ErrorCode::InvariantViolation);
  CHECK(code_of_config(edited_config("scen", [](auto& j) { j["scenarios"]["u1"]["path"] = "gone.csv"; })) ==
        ErrorCode::FileError);
  CHECK(code_of_config(edited_config("solver", [](auto& j) { j["solver"] = "quantum"; })) ==
        ErrorCode::InvariantViolation);
}

TEST_CASE("scenario round trip") {
  const auto dir = scratch("scen");
  const std::vector<Series> p = {{0, 1.25, 3}, {2, 2, 2}};
  io::save_scenarios(dir / "s.csv", p);
  CHECK(io::load_scenarios(dir / "s.csv") == p);
}
