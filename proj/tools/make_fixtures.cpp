// Regenerates the shipped data/ fixtures from the synthetic generators.
//   gridbargain-fixtures [data-dir]

#include <iostream>

#include "gridbargain/io.hpp"
#include "gridbargain/reference_cases.hpp"
#include "gridbargain/synthetic.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace gridbargain;
using ojson = nlohmann::ordered_json;

namespace {

ojson experiment(const std::string& output, const WeatherForecast& fc) {
  ojson j;
  j["model"] = "model.json";
  j["scenarios"] = {{"u1", {{"path", "pv_u1.csv"}, {"kind", "solar"}}},
                    {"u3", {{"path", "wt_u3.csv"}, {"kind", "wind"}}},
                    {"u4", {{"path", "pv_u4.csv"}, {"kind", "solar"}}}};
  j["classify"] = {{"weights", "uniform_random"}, {"seed", 0}};
  j["forecast"] = {{"solar", fc.solar}, {"wind", fc.wind}};
  j["gamma"] = {0.0, 0.0, 0.0, 0.0};
  j["gamma_sweep"] = {{"users", {1, 2, 3}}, {"steps", 11}, {"max", 1.0}};
  j["solver"] = "centralized";
  j["codes"] = {{"penalty", 1.0}, {"max_iterations", 10000}, {"balance_tolerance", 1e-4}};
  j["monte_carlo"] = {{"samples", 1000000}, {"seed", 0}, {"honest", {"u1"}}};
  j["output"] = output;
  return j;
}

ojson case_json(const reference::AllocationCase& c) {
  return ojson{{"name", c.name},
               {"ideal_costs", c.ideal},
               {"social_cost", c.social_cost},
               {"sum_ideal", c.sum_ideal},
               {"allocated", c.allocated},
               {"ideal_discount", c.ideal_discount}};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? argv[1] : "data";
  const auto dir = root / "four_user";
  fs::create_directories(dir);

  io::save_model(synthetic::four_user_model(), dir);
  for (const auto& pool : synthetic::four_user_pools()) {
    const auto prefix = pool.kind == WeatherKind::Solar ? "pv_" : "wt_";
    io::save_scenarios(dir / (prefix + pool.user + ".csv"), pool.profiles);
  }
  io::write_text(dir / "w1.json", experiment("out_w1", reference::forecast_w1()).dump(2) + "\n");
  io::write_text(dir / "w2.json", experiment("out_w2", reference::forecast_w2()).dump(2) + "\n");

  ojson table;
  table["cases"] = {case_json(reference::case_w1()), case_json(reference::case_w2())};
  table["w1_solo_bounds"] = reference::w1_solo_bounds();
  io::write_text(root / "allocation_cases.json", table.dump(2) + "\n");
  std::cout << "fixtures written to " << root << "\n";
  return 0;
}
