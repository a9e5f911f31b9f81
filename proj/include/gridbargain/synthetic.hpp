#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridbargain/model.hpp"
#include "gridbargain/rg_forecast.hpp"

namespace gridbargain::synthetic {

// Stand-ins for the utility/weather data sets that cannot be redistributed:
// smooth residential demand shapes, a three-tier time-of-use tariff with the
// sell price at 80% of the buy price, and scenario pools built from
// clear-sky PV curves and level-driven wind profiles.

Series time_of_use_buy(std::size_t steps);
Series residential_demand(std::size_t steps, double peak_kw, double phase_shift_h,
                          std::uint64_t seed);

/// 365 (or `count`) daily PV profiles for a panel of the given size.
std::vector<Series> pv_pool(std::size_t steps, double size_kw, std::size_t count,
                            std::uint64_t seed);
/// Daily wind profiles for a turbine of the given size.
std::vector<Series> wind_pool(std::size_t steps, double size_kw, std::size_t count,
                              std::uint64_t seed);

/// Four users: u1, u3, u4 active with PV 6.5 kW / WT 4.17 kW / PV 5.3 kW and
/// 12 / 7 / 10 kWh storage (E0 = E_min = 2.8 kWh, kappa = 0.9); u2 passive.
/// Constant unit BDC. Not validated.
MicrogridModel four_user_model(double unit_bdc_cents = 1.0);

struct RawPool {
  std::string user;
  WeatherKind kind = WeatherKind::Solar;
  std::vector<Series> profiles;
};

/// Scenario pools for the RG users of four_user_model.
std::vector<RawPool> four_user_pools(std::size_t count = 365);

struct Instance {
  MicrogridModel model;
  RgForecastResult rg;
};

struct RandomSpec {
  std::size_t min_users = 1;
  std::size_t max_users = 6;
  std::size_t steps = 24;
  double min_bdc = 0.2;  // cents/kWh; keep positive so overlap checks apply
  double max_bdc = 3.0;
};

/// Random feasible instance: validated model plus RG profiles. The grid
/// limit is left at its non-binding default and the communication graph is
/// a random connected graph.
Instance random_instance(std::uint64_t seed, const RandomSpec& spec = {});

/// Random connected undirected graph on `nodes` nodes (spanning tree plus
/// extra edges).
CommGraph random_connected_graph(std::size_t nodes, std::uint64_t seed, double extra_edge_prob);

}  // namespace gridbargain::synthetic
