#include "gridbargain/scheduling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gridbargain/error.hpp"

namespace gridbargain {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_length(const Series& s, std::size_t n, const char* what) {
  if (s.size() != n) {
    throw Error(ErrorCode::LengthMismatch, std::string(what) + ": expected length " +
                                               std::to_string(n) + ", got " +
                                               std::to_string(s.size()));
  }
}

// One storage device taking part in a schedule LP.
struct StorageBlock {
  std::size_t user;
  const DesdParams* desd;
  Series unit_cost;  // c_d(t), cents/kWh
};

// Social problem (all users) or an individual problem (one user): the grid
// connection balances the aggregate net load of the participants.
struct ScheduleLp {
  std::size_t T = 0;
  double dt = 1.0;
  const PriceProfile* prices = nullptr;
  double grid_max = 0.0;
  Series net_load;  // sum of P_D - P_R over participants
  std::vector<StorageBlock> storage;
  bool terminal_soc = false;

  std::size_t buy_col(std::size_t t) const { return t; }
  std::size_t sell_col(std::size_t t) const { return T + t; }
  std::size_t dis_col(std::size_t a, std::size_t t) const { return 2 * T + 3 * T * a + t; }
  std::size_t chg_col(std::size_t a, std::size_t t) const { return 2 * T + 3 * T * a + T + t; }
  std::size_t soc_col(std::size_t a, std::size_t t) const { return 2 * T + 3 * T * a + 2 * T + t; }
  std::size_t columns() const { return 2 * T + 3 * T * storage.size(); }
  std::size_t rows() const { return T + T * storage.size(); }

  ipm::BoundedQp build() const {
    using Eigen::VectorXd;
    const auto n = static_cast<Eigen::Index>(columns());
    const auto m = static_cast<Eigen::Index>(rows());
    ipm::BoundedQp qp;
    qp.b = VectorXd::Zero(m);
    qp.c = VectorXd::Zero(n);
    qp.lower = VectorXd::Zero(n);
    qp.upper = VectorXd::Constant(n, kInf);
    std::vector<Eigen::Triplet<double>> trip;

    for (std::size_t t = 0; t < T; ++t) {
      const auto row = static_cast<Eigen::Index>(t);
      trip.emplace_back(row, buy_col(t), 1.0);
      trip.emplace_back(row, sell_col(t), -1.0);
      qp.b[row] = net_load[t];
      qp.c[buy_col(t)] = prices->buy[t] * dt;
      qp.c[sell_col(t)] = -prices->sell[t] * dt;
      qp.upper[buy_col(t)] = grid_max;
      qp.upper[sell_col(t)] = grid_max;
    }
    for (std::size_t a = 0; a < storage.size(); ++a) {
      const auto& blk = storage[a];
      const auto& d = *blk.desd;
      for (std::size_t t = 0; t < T; ++t) {
        const auto bal = static_cast<Eigen::Index>(t);
        const auto dyn = static_cast<Eigen::Index>(T + T * a + t);
        trip.emplace_back(bal, dis_col(a, t), 1.0);
        trip.emplace_back(bal, chg_col(a, t), -1.0);
        // E(t) - E(t-1) + (P+/kappa - kappa P-) dt = 0, with E(-1) = E0.
        trip.emplace_back(dyn, soc_col(a, t), 1.0);
        if (t > 0) {
          trip.emplace_back(dyn, soc_col(a, t - 1), -1.0);
        } else {
          qp.b[dyn] = d.initial_kwh;
        }
        trip.emplace_back(dyn, dis_col(a, t), dt / d.efficiency);
        trip.emplace_back(dyn, chg_col(a, t), -d.efficiency * dt);

        qp.c[dis_col(a, t)] = blk.unit_cost[t] * dt;
        qp.c[chg_col(a, t)] = blk.unit_cost[t] * dt;
        qp.upper[dis_col(a, t)] = d.rating_kw;
        qp.upper[chg_col(a, t)] = d.rating_kw;
        qp.lower[soc_col(a, t)] = d.min_kwh;
        qp.upper[soc_col(a, t)] = d.max_kwh;
      }
      if (terminal_soc) {
        qp.lower[soc_col(a, T - 1)] = std::max(d.min_kwh, d.initial_kwh);
      }
    }
    qp.A.resize(m, n);
    qp.A.setFromTriplets(trip.begin(), trip.end());
    return qp;
  }
};

struct LpResult {
  Series buy, sell;
  std::vector<StorageSchedule> storage;
  double trading = 0.0;
  std::vector<double> bdc;  // per storage block
  int iterations = 0;
  int linearizations = 0;
};

Series clean(const Eigen::VectorXd& x, std::size_t start, std::size_t T, double upper) {
  Series out(T);
  for (std::size_t t = 0; t < T; ++t) {
    out[t] = std::clamp(x[static_cast<Eigen::Index>(start + t)], 0.0, upper);
  }
  return out;
}

LpResult solve_once(const ScheduleLp& lp, const ScheduleOptions& options) {
  const auto qp = lp.build();
  const double violation = ipm::phase_one(qp, options.ipm);
  if (violation > options.feasibility_tol * (1.0 + qp.b.lpNorm<Eigen::Infinity>())) {
    throw Error(ErrorCode::Infeasible,
                "schedule infeasible: minimum total constraint violation " +
                    std::to_string(violation) +
                    " (demand or surplus exceeds grid, storage and RG limits)");
  }
  const auto sol = ipm::solve(qp, options.ipm);
  if (sol.status != ipm::Status::Optimal) {
    throw Error(ErrorCode::SolverStall, "schedule solver hit its iteration cap (" +
                                            std::to_string(sol.iterations) + " iterations)");
  }

  LpResult res;
  res.iterations = sol.iterations;
  const auto T = lp.T;
  res.buy = clean(sol.x, lp.buy_col(0), T, lp.grid_max);
  res.sell = clean(sol.x, lp.sell_col(0), T, lp.grid_max);
  res.trading = trading_cost(lp.prices->buy, lp.prices->sell, res.buy, res.sell, lp.dt);
  for (std::size_t a = 0; a < lp.storage.size(); ++a) {
    const auto& blk = lp.storage[a];
    StorageSchedule s;
    s.user = blk.user;
    s.discharge = clean(sol.x, lp.dis_col(a, 0), T, blk.desd->rating_kw);
    s.charge = clean(sol.x, lp.chg_col(a, 0), T, blk.desd->rating_kw);
    s.soc = soc_trajectory(*blk.desd, s.discharge, s.charge, lp.dt);
    res.bdc.push_back(
        bdc_cost(blk.desd->bdc, s.discharge, s.charge, s.soc, blk.desd->max_kwh, lp.dt));
    res.storage.push_back(std::move(s));
  }
  return res;
}

double total_cost(const LpResult& r) {
  double total = r.trading;
  for (double b : r.bdc) {
    total += b;
  }
  return total;
}

// Constant BDC gives a single LP. PiecewiseSoc is handled by successive
// linearization: unit costs are frozen at the previous SOC path (starting
// from the idle path) until the true cost moves by less than the tolerance.
LpResult solve_schedule(ScheduleLp lp, const ScheduleOptions& options) {
  const bool all_constant = std::all_of(lp.storage.begin(), lp.storage.end(),
                                        [](const StorageBlock& b) { return is_constant(b.desd->bdc); });
  for (auto& blk : lp.storage) {
    const double idle = blk.desd->initial_kwh / blk.desd->max_kwh;
    blk.unit_cost.assign(lp.T, 0.0);
    for (std::size_t t = 0; t < lp.T; ++t) {
      blk.unit_cost[t] = unit_bdc(blk.desd->bdc, blk.desd->max_kwh > 0 ? idle : 0.0);
    }
  }
  LpResult best = solve_once(lp, options);
  best.linearizations = 1;
  if (all_constant) {
    return best;
  }
  double previous = total_cost(best);
  int iterations = best.iterations;
  for (int round = 1; round < options.max_linearizations; ++round) {
    for (std::size_t a = 0; a < lp.storage.size(); ++a) {
      auto& blk = lp.storage[a];
      const auto& soc = best.storage[a].soc;
      for (std::size_t t = 0; t < lp.T; ++t) {
        blk.unit_cost[t] = unit_bdc(blk.desd->bdc, soc[t] / blk.desd->max_kwh);
      }
    }
    LpResult next = solve_once(lp, options);
    iterations += next.iterations;
    next.linearizations = round + 1;
    const double cost = total_cost(next);
    const bool settled = std::abs(cost - previous) < options.linearization_tol;
    if (cost <= total_cost(best)) {
      best = std::move(next);
    }
    best.linearizations = round + 1;
    previous = cost;
    if (settled) {
      break;
    }
  }
  best.iterations = iterations;
  return best;
}

}  // namespace

double trading_cost(const Series& p_buy, const Series& p_sell, const Series& buy,
                    const Series& sell, double dt) {
  const auto T = p_buy.size();
  require_length(p_sell, T, "trading_cost p_sell");
  require_length(buy, T, "trading_cost buy");
  require_length(sell, T, "trading_cost sell");
  double total = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    total += (p_buy[t] * buy[t] - p_sell[t] * sell[t]) * dt;
  }
  return total;
}

double bdc_cost(const BdcModel& bdc, const Series& discharge, const Series& charge,
                const Series& soc, double capacity, double dt) {
  const auto T = discharge.size();
  require_length(charge, T, "bdc_cost charge");
  const bool constant = is_constant(bdc);
  if (!constant) {
    require_length(soc, T, "bdc_cost soc");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const double unit =
        constant ? unit_bdc(bdc, 0.0) : unit_bdc(bdc, capacity > 0 ? soc[t] / capacity : 0.0);
    total += unit * (discharge[t] + charge[t]) * dt;
  }
  return total;
}

Series user_rg(const MicrogridModel& model, const RgForecastResult& rg, std::size_t i) {
  const auto& u = model.users[i];
  const auto T = model.horizon.steps;
  if (!u.has_rg()) {
    return Series(T, 0.0);
  }
  const auto it = rg.by_user.find(u.id);
  if (it == rg.by_user.end()) {
    throw Error(ErrorCode::InvariantViolation, "no RG forecast for user '" + u.id + "'");
  }
  require_length(it->second, T, "RG forecast");
  return it->second;
}

SocialScheduleOutcome solve_social(const MicrogridModel& model, const RgForecastResult& rg,
                                   const ScheduleOptions& options) {
  const auto T = model.horizon.steps;
  ScheduleLp lp;
  lp.T = T;
  lp.dt = model.horizon.dt;
  lp.prices = &model.prices;
  lp.grid_max = model.grid_max_kw();
  lp.terminal_soc = options.terminal_soc_at_least_initial;
  lp.net_load.assign(T, 0.0);
  for (std::size_t i = 0; i < model.user_count(); ++i) {
    const auto r = user_rg(model, rg, i);
    for (std::size_t t = 0; t < T; ++t) {
      lp.net_load[t] += model.demands[i][t] - r[t];
    }
    if (model.users[i].is_active()) {
      lp.storage.push_back({i, &*model.users[i].desd, {}});
    }
  }

  auto res = solve_schedule(std::move(lp), options);
  SocialScheduleOutcome out;
  out.decision.grid_buy = std::move(res.buy);
  out.decision.grid_sell = std::move(res.sell);
  out.trading_cost = res.trading;
  out.bdc_cost.assign(model.user_count(), 0.0);
  out.social_cost = res.trading;
  for (std::size_t a = 0; a < res.storage.size(); ++a) {
    out.bdc_cost[res.storage[a].user] = res.bdc[a];
    out.social_cost += res.bdc[a];
  }
  out.decision.storage = std::move(res.storage);
  out.solver_iterations = res.iterations;
  out.linearizations = res.linearizations;
  return out;
}

IndividualOutcome solve_individual(const MicrogridModel& model, const RgForecastResult& rg,
                                   std::size_t user, const ScheduleOptions& options) {
  const auto T = model.horizon.steps;
  const auto& spec = model.users.at(user);
  const double grid_max = model.grid_max_kw();
  IndividualOutcome out;
  out.user = user;

  if (!spec.is_active()) {
    // No degrees of freedom: the whole demand is bought.
    const auto& demand = model.demands[user];
    for (std::size_t t = 0; t < T; ++t) {
      if (demand[t] > grid_max) {
        throw Error(ErrorCode::Infeasible, "passive user '" + spec.id + "' demand exceeds P_G_max");
      }
    }
    out.grid_buy = demand;
    out.grid_sell.assign(T, 0.0);
    out.trading_cost = trading_cost(model.prices.buy, model.prices.sell, out.grid_buy,
                                    out.grid_sell, model.horizon.dt);
    out.ideal_selfish_cost = out.trading_cost;
    return out;
  }

  ScheduleLp lp;
  lp.T = T;
  lp.dt = model.horizon.dt;
  lp.prices = &model.prices;
  lp.grid_max = grid_max;
  lp.terminal_soc = options.terminal_soc_at_least_initial;
  const auto r = user_rg(model, rg, user);
  lp.net_load.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    lp.net_load[t] = model.demands[user][t] - r[t];
  }
  lp.storage.push_back({user, &*spec.desd, {}});

  auto res = solve_schedule(std::move(lp), options);
  out.grid_buy = std::move(res.buy);
  out.grid_sell = std::move(res.sell);
  out.trading_cost = res.trading;
  out.bdc_cost = res.bdc.front();
  out.storage = std::move(res.storage.front());
  out.ideal_selfish_cost = out.trading_cost + out.bdc_cost;
  return out;
}

std::vector<IndividualOutcome> solve_all_individual(const MicrogridModel& model,
                                                    const RgForecastResult& rg,
                                                    const ScheduleOptions& options) {
  std::vector<IndividualOutcome> out;
  out.reserve(model.user_count());
  for (std::size_t i = 0; i < model.user_count(); ++i) {
    out.push_back(solve_individual(model, rg, i, options));
  }
  return out;
}

FeasibilityReport check_social(const MicrogridModel& model, const RgForecastResult& rg,
                               const SocialDecision& decision) {
  const auto T = model.horizon.steps;
  const double grid_max = model.grid_max_kw();
  FeasibilityReport rep;
  Series net(T, 0.0);
  for (std::size_t i = 0; i < model.user_count(); ++i) {
    const auto r = user_rg(model, rg, i);
    for (std::size_t t = 0; t < T; ++t) {
      net[t] += model.demands[i][t] - r[t];
    }
  }
  auto rating_violation = [](double v, double cap) {
    return std::max({0.0, -v, v - cap});
  };
  for (std::size_t t = 0; t < T; ++t) {
    double supply = decision.grid_buy[t] - decision.grid_sell[t];
    for (const auto& s : decision.storage) {
      supply += s.discharge[t] - s.charge[t];
    }
    rep.balance = std::max(rep.balance, std::abs(net[t] - supply));
    rep.rating = std::max({rep.rating, rating_violation(decision.grid_buy[t], grid_max),
                           rating_violation(decision.grid_sell[t], grid_max)});
    rep.grid_overlap = std::max(rep.grid_overlap, decision.grid_buy[t] * decision.grid_sell[t]);
  }
  for (const auto& s : decision.storage) {
    const auto& d = *model.users[s.user].desd;
    const auto soc = soc_trajectory(d, s.discharge, s.charge, model.horizon.dt);
    bool positive_bdc = false;
    for (std::size_t t = 0; t < T; ++t) {
      rep.soc = std::max({rep.soc, d.min_kwh - soc[t], soc[t] - d.max_kwh});
      rep.rating = std::max({rep.rating, rating_violation(s.discharge[t], d.rating_kw),
                             rating_violation(s.charge[t], d.rating_kw)});
      positive_bdc = positive_bdc || unit_bdc(d.bdc, soc[t] / d.max_kwh) > 0.0;
    }
    if (positive_bdc) {
      for (std::size_t t = 0; t < T; ++t) {
        rep.storage_overlap = std::max(rep.storage_overlap, s.discharge[t] * s.charge[t]);
      }
    }
  }
  return rep;
}

}  // namespace gridbargain
