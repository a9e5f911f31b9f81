#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gridbargain/model.hpp"
#include "gridbargain/rg_forecast.hpp"
#include "gridbargain/scheduling.hpp"

namespace testkit {

using namespace gridbargain;

inline Series constant(std::size_t n, double v) { return Series(n, v); }

inline UserSpec passive(std::string id) {
  UserSpec u;
  u.id = std::move(id);
  return u;
}

inline UserSpec active(std::string id, DesdParams desd, RgUnit rg = {}) {
  UserSpec u;
  u.id = std::move(id);
  u.kind = UserKind::Active;
  u.desd = desd;
  u.rg = rg;
  return u;
}

inline DesdParams battery(double e0, double emin, double emax, double rating, double kappa,
                          double bdc_cents) {
  DesdParams d;
  d.initial_kwh = e0;
  d.min_kwh = emin;
  d.max_kwh = emax;
  d.rating_kw = rating;
  d.efficiency = kappa;
  d.bdc = ConstantBdc{bdc_cents};
  return d;
}

inline MicrogridModel make_model(std::vector<UserSpec> users, std::vector<Series> demands,
                                 Series buy, Series sell, double dt = 1.0) {
  MicrogridModel m;
  m.horizon.steps = buy.size();
  m.horizon.dt = dt;
  m.users = std::move(users);
  m.demands = std::move(demands);
  m.prices.buy = std::move(buy);
  m.prices.sell = std::move(sell);
  return validate_model(std::move(m));
}

// Social objective recomputed from the decision alone: grid trading plus
// every battery's degradation charge.
inline double social_objective(const MicrogridModel& m, const SocialDecision& d) {
  double cost = trading_cost(m.prices.buy, m.prices.sell, d.grid_buy, d.grid_sell, m.horizon.dt);
  for (const auto& s : d.storage) {
    const auto& desd = *m.users[s.user].desd;
    cost += bdc_cost(desd.bdc, s.discharge, s.charge, s.soc, desd.max_kwh, m.horizon.dt);
  }
  return cost;
}

// Constraint residuals recomputed from scratch (independent of check_social).
struct Residuals {
  double balance = 0.0;
  double soc = 0.0;
  double rating = 0.0;
  double grid_overlap = 0.0;
  double storage_overlap = 0.0;
};

inline Residuals residuals(const MicrogridModel& m, const RgForecastResult& rg,
                           const SocialDecision& d) {
  const auto T = m.horizon.steps;
  Residuals out;
  for (std::size_t t = 0; t < T; ++t) {
    double lhs = d.grid_buy[t] - d.grid_sell[t];
    for (const auto& s : d.storage) lhs += s.discharge[t] - s.charge[t];
    for (std::size_t i = 0; i < m.user_count(); ++i) {
      const auto it = rg.by_user.find(m.users[i].id);
      if (m.users[i].has_rg() && it != rg.by_user.end()) lhs += it->second[t];
      lhs -= m.demands[i][t];
    }
    out.balance = std::max(out.balance, std::abs(lhs));
    const double gmax = m.grid_max_kw();
    out.rating = std::max({out.rating, -d.grid_buy[t], -d.grid_sell[t], d.grid_buy[t] - gmax,
                           d.grid_sell[t] - gmax});
    out.grid_overlap = std::max(out.grid_overlap, d.grid_buy[t] * d.grid_sell[t]);
  }
  for (const auto& s : d.storage) {
    const auto& b = *m.users[s.user].desd;
    double e = b.initial_kwh;
    for (std::size_t t = 0; t < T; ++t) {
      e -= (s.discharge[t] / b.efficiency - b.efficiency * s.charge[t]) * m.horizon.dt;
      out.soc = std::max({out.soc, b.min_kwh - e, e - b.max_kwh});
      out.rating = std::max({out.rating, -s.discharge[t], -s.charge[t],
                             s.discharge[t] - b.rating_kw, s.charge[t] - b.rating_kw});
      out.storage_overlap = std::max(out.storage_overlap, s.discharge[t] * s.charge[t]);
    }
  }
  return out;
}

inline std::vector<double> random_vector(std::mt19937_64& gen, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) {
    x = u(gen);
  }
  return v;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

}  // namespace testkit
