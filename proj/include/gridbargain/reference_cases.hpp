#pragma once

#include <string>
#include <vector>

#include "gridbargain/rg_forecast.hpp"

namespace gridbargain::reference {

// Published four-user allocation results (cents), used as fixtures for the
// bargaining arithmetic. Users are ordered 1..4; user 2 is passive.

struct AllocationCase {
  std::string name;
  std::vector<double> ideal;      // D_i
  double social_cost = 0.0;       // J_soc
  double sum_ideal = 0.0;         // sum D_i as printed
  std::vector<double> allocated;  // J_i^0 as printed
  double ideal_discount = 0.0;    // eps0 as printed
};

AllocationCase case_w1();
AllocationCase case_w2();

/// Printed single-adjuster gamma bounds for W1, users 1..4.
std::vector<double> w1_solo_bounds();

/// Weather forecasts of the two cases ({sunny, cloudy, rainy}; l1..l4).
WeatherForecast forecast_w1();
WeatherForecast forecast_w2();

}  // namespace gridbargain::reference
