#include "gridbargain/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "gridbargain/error.hpp"

namespace gridbargain {

double unit_bdc(const BdcModel& bdc, double soc_fraction) {
  if (const auto* c = std::get_if<ConstantBdc>(&bdc)) {
    return c->cents_per_kwh;
  }
  const auto& points = std::get<PiecewiseSocBdc>(bdc).breakpoints;
  if (points.empty()) {
    return 0.0;
  }
  double cost = points.front().cents_per_kwh;
  for (const auto& p : points) {
    if (soc_fraction >= p.soc_fraction) {
      cost = p.cents_per_kwh;
    } else {
      break;
    }
  }
  return cost;
}

bool is_constant(const BdcModel& bdc) { return std::holds_alternative<ConstantBdc>(bdc); }

std::vector<std::vector<std::size_t>> CommGraph::adjacency() const {
  std::vector<std::vector<std::size_t>> adj(nodes);
  for (const auto& [a, b] : edges) {
    if (a < nodes && b < nodes && a != b) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
  }
  for (auto& row : adj) {
    std::sort(row.begin(), row.end());
  }
  return adj;
}

bool CommGraph::connected() const {
  if (nodes == 0) {
    return false;
  }
  const auto adj = adjacency();
  std::vector<bool> seen(nodes, false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  std::size_t visited = 1;
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    for (auto v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++visited;
        stack.push_back(v);
      }
    }
  }
  return visited == nodes;
}

CommGraph ring_graph(std::size_t nodes) {
  CommGraph g;
  g.nodes = nodes;
  if (nodes == 2) {
    g.edges.emplace_back(0, 1);
  } else if (nodes > 2) {
    for (std::size_t i = 0; i < nodes; ++i) {
      g.edges.emplace_back(i, (i + 1) % nodes);
    }
  }
  return g;
}

double MicrogridModel::grid_max_kw() const {
  if (!grid.max_kw) {
    throw Error(ErrorCode::InvariantViolation, "grid limit not set; validate the model first");
  }
  return *grid.max_kw;
}

std::size_t MicrogridModel::index_of(const std::string& user_id) const {
  for (std::size_t i = 0; i < users.size(); ++i) {
    if (users[i].id == user_id) {
      return i;
    }
  }
  throw Error(ErrorCode::InvariantViolation, "unknown user id '" + user_id + "'");
}

namespace {

class Checker {
 public:
  void require(bool ok, std::string field, std::string rule) {
    if (!ok) {
      violations_.push_back({std::move(field), std::move(rule)});
    }
  }

  std::vector<Violation>& violations() { return violations_; }

 private:
  std::vector<Violation> violations_;
};

bool all_finite_nonneg(const Series& s) {
  return std::all_of(s.begin(), s.end(), [](double v) { return std::isfinite(v) && v >= 0.0; });
}

void check_desd(Checker& check, const std::string& prefix, const DesdParams& d) {
  check.require(std::isfinite(d.min_kwh) && d.min_kwh >= 0.0, prefix + ".min_kwh", "E_min >= 0");
  check.require(d.min_kwh <= d.initial_kwh, prefix + ".initial_kwh", "E_min <= E0");
  check.require(d.initial_kwh <= d.max_kwh, prefix + ".max_kwh", "E0 <= E_max");
  check.require(std::isfinite(d.max_kwh), prefix + ".max_kwh", "finite");
  check.require(std::isfinite(d.rating_kw) && d.rating_kw > 0.0, prefix + ".rating_kw",
                "P_B_max > 0");
  check.require(d.efficiency > 0.0 && d.efficiency <= 1.0, prefix + ".efficiency",
                "0 < kappa <= 1");
  if (const auto* c = std::get_if<ConstantBdc>(&d.bdc)) {
    check.require(std::isfinite(c->cents_per_kwh) && c->cents_per_kwh >= 0.0, prefix + ".bdc",
                  "unit cost >= 0");
  } else {
    const auto& points = std::get<PiecewiseSocBdc>(d.bdc).breakpoints;
    check.require(!points.empty(), prefix + ".bdc", "at least one breakpoint");
    for (std::size_t k = 0; k < points.size(); ++k) {
      const auto& p = points[k];
      check.require(p.soc_fraction >= 0.0 && p.soc_fraction <= 1.0, prefix + ".bdc",
                    "breakpoint soc in [0,1]");
      check.require(std::isfinite(p.cents_per_kwh) && p.cents_per_kwh >= 0.0, prefix + ".bdc",
                    "unit cost >= 0");
      if (k > 0) {
        check.require(p.soc_fraction > points[k - 1].soc_fraction, prefix + ".bdc",
                      "breakpoints strictly increasing");
      }
    }
  }
}

}  // namespace

MicrogridModel validate_model(MicrogridModel raw) {
  Checker check;
  const auto T = raw.horizon.steps;
  check.require(T >= 1, "horizon.steps", "T >= 1");
  check.require(std::isfinite(raw.horizon.dt) && raw.horizon.dt > 0.0, "horizon.dt", "dt > 0");

  const auto r = raw.users.size();
  check.require(r >= 1, "users", "r >= 1");

  std::set<std::string> ids;
  for (std::size_t i = 0; i < r; ++i) {
    const auto& u = raw.users[i];
    const std::string prefix = "users[" + std::to_string(i) + "]";
    check.require(!u.id.empty(), prefix + ".id", "non-empty");
    check.require(ids.insert(u.id).second, prefix + ".id", "unique");
    check.require(std::isfinite(u.rg.size_kw) && u.rg.size_kw >= 0.0, prefix + ".rg.size_kw",
                  "size >= 0");
    if (u.kind == UserKind::Passive) {
      check.require(!u.desd.has_value(), prefix + ".desd", "passive user has no DESD");
      check.require(!u.has_rg(), prefix + ".rg", "passive user has no RG");
    } else {
      check.require(u.desd.has_value(), prefix + ".desd", "active user requires a DESD");
      if (u.desd) {
        check_desd(check, prefix + ".desd", *u.desd);
      }
    }
  }

  check.require(raw.demands.size() == r, "demands", "one profile per user");
  for (std::size_t i = 0; i < raw.demands.size(); ++i) {
    const std::string field = "demands[" + std::to_string(i) + "]";
    check.require(raw.demands[i].size() == T, field, "length T");
    check.require(all_finite_nonneg(raw.demands[i]), field, "P_D(t) >= 0");
  }

  check.require(raw.prices.buy.size() == T, "prices.buy", "length T");
  check.require(raw.prices.sell.size() == T, "prices.sell", "length T");
  check.require(all_finite_nonneg(raw.prices.buy), "prices.buy", "p_b(t) >= 0");
  check.require(all_finite_nonneg(raw.prices.sell), "prices.sell", "p_s(t) >= 0");

  if (raw.grid.max_kw) {
    check.require(std::isfinite(*raw.grid.max_kw) && *raw.grid.max_kw > 0.0, "grid.max_kw",
                  "P_G_max > 0");
  }

  if (raw.graph.edges.empty() && raw.graph.nodes == 0) {
    raw.graph = ring_graph(r + 1);
  }
  check.require(raw.graph.nodes == r + 1, "graph.nodes", "r users + 1 grid node");
  std::set<std::pair<std::size_t, std::size_t>> seen_edges;
  for (const auto& [a, b] : raw.graph.edges) {
    check.require(a < raw.graph.nodes && b < raw.graph.nodes, "graph.edges", "endpoint in range");
    check.require(a != b, "graph.edges", "no self loops");
    check.require(seen_edges.insert(std::minmax(a, b)).second, "graph.edges", "no duplicate edges");
  }

  if (!check.violations().empty()) {
    throw ValidationError(std::move(check.violations()));
  }
  if (!raw.graph.connected()) {
    throw ValidationError({{"graph", "communication graph must be connected"}},
                          ErrorCode::DisconnectedGraph);
  }

  if (!raw.grid.max_kw) {
    // Non-binding default: ten times the larger of peak aggregate demand and
    // the total nameplate that could push power back into the grid.
    double peak = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      double total = 0.0;
      for (const auto& d : raw.demands) {
        total += d[t];
      }
      peak = std::max(peak, total);
    }
    double nameplate = 0.0;
    for (const auto& u : raw.users) {
      nameplate += u.rg.size_kw + (u.desd ? u.desd->rating_kw : 0.0);
    }
    raw.grid.max_kw = 10.0 * std::max({peak, nameplate, 1.0});
  }
  return raw;
}

std::vector<std::string> model_warnings(const MicrogridModel& model) {
  std::vector<std::string> out;
  const auto& p = model.prices;
  for (std::size_t t = 0; t < std::min(p.buy.size(), p.sell.size()); ++t) {
    if (p.sell[t] >= p.buy[t]) {
      std::ostringstream msg;
      msg << "p_s(" << t << ") = " << p.sell[t] << " >= p_b(" << t << ") = " << p.buy[t]
          << " (arbitrage risk)";
      out.push_back(msg.str());
    }
  }
  return out;
}

Series soc_trajectory(const DesdParams& desd, const Series& discharge, const Series& charge,
                      double dt) {
  if (discharge.size() != charge.size()) {
    throw Error(ErrorCode::LengthMismatch, "soc_trajectory: discharge/charge length differ");
  }
  Series soc(discharge.size());
  double energy = desd.initial_kwh;
  for (std::size_t t = 0; t < discharge.size(); ++t) {
    energy -= (discharge[t] / desd.efficiency - desd.efficiency * charge[t]) * dt;
    soc[t] = energy;
  }
  return soc;
}

}  // namespace gridbargain
