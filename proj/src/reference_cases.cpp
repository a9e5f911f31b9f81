#include "gridbargain/reference_cases.hpp"

namespace gridbargain::reference {

AllocationCase case_w1() {
  return {"W1", {-61.33, 481.18, 101.48, -23.34}, 438.68, 497.99,
          {-76.16, 466.36, 86.65, -38.16}, 14.83};
}

AllocationCase case_w2() {
  return {"W2", {164.92, 481.18, 382.19, 158.04}, 1152.87, 1186.35,
          {156.55, 472.81, 373.82, 149.67}, 8.37};
}

std::vector<double> w1_solo_bounds() { return {0.9671, 0.1233, 0.5845, 2.5417}; }

WeatherForecast forecast_w1() { return {{0.8, 0.2, 0.0}, {0.0, 0.3, 0.7, 0.0}}; }

WeatherForecast forecast_w2() { return {{0.0, 0.2, 0.8}, {0.5, 0.5, 0.0, 0.0}}; }

}  // namespace gridbargain::reference
