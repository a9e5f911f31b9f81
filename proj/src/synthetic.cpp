#include "gridbargain/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gridbargain/rng.hpp"

namespace gridbargain::synthetic {

namespace {

// Sequential view over a counter-based stream.
class Draw {
 public:
  Draw(std::uint64_t seed, std::uint64_t stream) : rng_(seed), stream_(stream) {}

  double uniform() { return rng_.uniform(stream_, counter_++); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t index(std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n)));
  }

 private:
  CounterRng rng_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

double hour_of(std::size_t t, std::size_t steps) {
  return (static_cast<double>(t) + 0.5) * 24.0 / static_cast<double>(steps);
}

}  // namespace

Series time_of_use_buy(std::size_t steps) {
  Series p(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const double h = hour_of(t, steps);
    if (h < 7.0 || h >= 22.0) {
      p[t] = 6.5;
    } else if (h >= 12.0 && h < 18.0) {
      p[t] = 18.0;
    } else {
      p[t] = 10.5;
    }
  }
  return p;
}

Series residential_demand(std::size_t steps, double peak_kw, double phase_shift_h,
                          std::uint64_t seed) {
  Draw draw(seed, 11);
  Series d(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const double h = hour_of(t, steps) - phase_shift_h;
    const double morning = std::exp(-0.5 * std::pow((h - 8.0) / 1.5, 2));
    const double evening = std::exp(-0.5 * std::pow((h - 19.0) / 2.5, 2));
    const double base = 0.3;
    d[t] = peak_kw * (base + 0.45 * morning + 0.7 * evening) * draw.uniform(0.9, 1.1);
  }
  return d;
}

std::vector<Series> pv_pool(std::size_t steps, double size_kw, std::size_t count,
                            std::uint64_t seed) {
  std::vector<Series> pool;
  pool.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Draw draw(seed, 1000 + k);
    const double season =
        0.75 + 0.25 * std::cos(2.0 * std::numbers::pi * (static_cast<double>(k) - 172.0) / 365.0);
    const double clearness = std::clamp(draw.uniform(0.05, 1.0), 0.0, 1.0);
    const double day_length = 11.0 + 3.0 * season;
    Series p(steps, 0.0);
    for (std::size_t t = 0; t < steps; ++t) {
      const double h = hour_of(t, steps);
      const double x = (h - 12.5) / (day_length / 2.0);
      if (std::abs(x) < 1.0) {
        const double shape = std::cos(0.5 * std::numbers::pi * x);
        p[t] = size_kw * 0.85 * season * clearness * shape * shape * draw.uniform(0.85, 1.0);
      }
    }
    pool.push_back(std::move(p));
  }
  return pool;
}

std::vector<Series> wind_pool(std::size_t steps, double size_kw, std::size_t count,
                              std::uint64_t seed) {
  std::vector<Series> pool;
  pool.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Draw draw(seed, 5000 + k);
    const double level = draw.uniform(0.0, 1.0);
    double state = level;
    Series p(steps, 0.0);
    for (std::size_t t = 0; t < steps; ++t) {
      state = std::clamp(0.8 * state + 0.2 * level + draw.uniform(-0.12, 0.12), 0.0, 1.0);
      // Cubic region of a turbine power curve, capped at rated output.
      p[t] = size_kw * std::min(1.0, std::pow(state, 3) * 1.6);
    }
    pool.push_back(std::move(p));
  }
  return pool;
}

MicrogridModel four_user_model(double unit_bdc_cents) {
  MicrogridModel m;
  m.horizon = {24, 1.0};
  auto desd = [&](double max_kwh, double rating) {
    DesdParams d;
    d.initial_kwh = 2.8;
    d.min_kwh = 2.8;
    d.max_kwh = max_kwh;
    d.rating_kw = rating;
    d.efficiency = 0.9;
    d.bdc = ConstantBdc{unit_bdc_cents};
    return d;
  };
  m.users.push_back({"u1", UserKind::Active, desd(12.0, 4.3), {RgType::Pv, 6.5}});
  m.users.push_back({"u2", UserKind::Passive, std::nullopt, {}});
  m.users.push_back({"u3", UserKind::Active, desd(7.0, 3.3), {RgType::Wt, 4.17}});
  m.users.push_back({"u4", UserKind::Active, desd(10.0, 4.3), {RgType::Pv, 5.3}});
  m.demands = {
      residential_demand(24, 2.6, 0.0, 1),
      residential_demand(24, 3.4, 0.5, 2),
      residential_demand(24, 2.8, -0.5, 3),
      residential_demand(24, 2.2, 1.0, 4),
  };
  m.prices.buy = time_of_use_buy(24);
  m.prices.sell.resize(24);
  for (std::size_t t = 0; t < 24; ++t) {
    m.prices.sell[t] = 0.8 * m.prices.buy[t];
  }
  return m;
}

std::vector<RawPool> four_user_pools(std::size_t count) {
  return {
      {"u1", WeatherKind::Solar, pv_pool(24, 6.5, count, 101)},
      {"u3", WeatherKind::Wind, wind_pool(24, 4.17, count, 103)},
      {"u4", WeatherKind::Solar, pv_pool(24, 5.3, count, 104)},
  };
}

CommGraph random_connected_graph(std::size_t nodes, std::uint64_t seed, double extra_edge_prob) {
  Draw draw(seed, 77);
  CommGraph g;
  g.nodes = nodes;
  std::vector<std::vector<bool>> has(nodes, std::vector<bool>(nodes, false));
  for (std::size_t v = 1; v < nodes; ++v) {
    const auto u = draw.index(v);
    g.edges.emplace_back(u, v);
    has[u][v] = has[v][u] = true;
  }
  for (std::size_t a = 0; a < nodes; ++a) {
    for (std::size_t b = a + 1; b < nodes; ++b) {
      if (!has[a][b] && draw.uniform() < extra_edge_prob) {
        g.edges.emplace_back(a, b);
        has[a][b] = has[b][a] = true;
      }
    }
  }
  return g;
}

Instance random_instance(std::uint64_t seed, const RandomSpec& spec) {
  Draw draw(seed, 1);
  const auto T = spec.steps;
  const auto r = spec.min_users + draw.index(spec.max_users - spec.min_users + 1);

  Instance inst;
  auto& m = inst.model;
  m.horizon = {T, 24.0 / static_cast<double>(T)};
  for (std::size_t i = 0; i < r; ++i) {
    UserSpec u;
    u.id = "u" + std::to_string(i + 1);
    const bool active = draw.uniform() < 0.7;
    if (active) {
      u.kind = UserKind::Active;
      DesdParams d;
      d.max_kwh = draw.uniform(4.0, 14.0);
      d.min_kwh = draw.uniform(0.0, 0.3) * d.max_kwh;
      d.initial_kwh = draw.uniform(d.min_kwh, d.max_kwh);
      d.rating_kw = draw.uniform(1.5, 5.0);
      d.efficiency = draw.uniform(0.85, 1.0);
      d.bdc = ConstantBdc{draw.uniform(spec.min_bdc, spec.max_bdc)};
      u.desd = d;
      const double g = draw.uniform();
      if (g < 0.4) {
        u.rg = {RgType::Pv, draw.uniform(2.0, 7.0)};
      } else if (g < 0.7) {
        u.rg = {RgType::Wt, draw.uniform(1.5, 5.0)};
      }
    }
    m.users.push_back(u);
    m.demands.push_back(
        residential_demand(T, draw.uniform(1.0, 4.0), draw.uniform(-2.0, 2.0), seed * 31 + i));
    if (u.rg.type == RgType::Pv) {
      auto pool = pv_pool(T, u.rg.size_kw, 1, seed * 97 + i);
      inst.rg.by_user[u.id] = pool.front();
    } else if (u.rg.type == RgType::Wt) {
      auto pool = wind_pool(T, u.rg.size_kw, 1, seed * 89 + i);
      inst.rg.by_user[u.id] = pool.front();
    }
  }
  const double base = draw.uniform(4.0, 12.0);
  const double swing = draw.uniform(2.0, 15.0);
  m.prices.buy.resize(T);
  m.prices.sell.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    const double h = hour_of(t, T);
    m.prices.buy[t] = base + swing * std::exp(-0.5 * std::pow((h - 16.0) / 3.0, 2)) +
                      draw.uniform(0.0, 1.0);
    m.prices.sell[t] = 0.8 * m.prices.buy[t];
  }
  m.graph = random_connected_graph(r + 1, seed, 0.3);
  m = validate_model(std::move(m));
  return inst;
}

}  // namespace gridbargain::synthetic
