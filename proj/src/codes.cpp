#include "gridbargain/codes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <memory>
#include <ostream>

#include "gridbargain/consensus.hpp"
#include "gridbargain/error.hpp"
#include "gridbargain/rng.hpp"
#include "json.hpp"

namespace gridbargain {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class Fnv1a {
 public:
  void add(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ = (h_ ^ p[i]) * 0x100000001b3ULL;
    }
  }
  template <class T>
  void add(const T& v) {
    add(&v, sizeof v);
  }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

// argmin over 0 <= a, b <= cap of (pb a - ps b) dt + rho/2 (a - b - v)^2.
std::pair<double, double> grid_prox(double pb, double ps, double dt, double rho, double v,
                                    double cap) {
  auto f = [&](double a, double b) {
    const double d = a - b - v;
    return (pb * a - ps * b) * dt + 0.5 * rho * d * d;
  };
  const std::pair<double, double> cand[4] = {
      {std::clamp(v - pb * dt / rho, 0.0, cap), 0.0},
      {0.0, std::clamp(ps * dt / rho - v, 0.0, cap)},
      {cap, std::clamp(cap - v + ps * dt / rho, 0.0, cap)},
      {std::clamp(cap + v - pb * dt / rho, 0.0, cap), cap},
  };
  auto best = cand[0];
  double fbest = f(best.first, best.second);
  for (int k = 1; k < 4; ++k) {
    const double fk = f(cand[k].first, cand[k].second);
    if (fk < fbest) {
      fbest = fk;
      best = cand[k];
    }
  }
  return best;
}

// Proximal step of one storage owner. Columns: [dis, chg, soc, y] with
// y = dis - chg; only y carries the quadratic term.
class StorageAgent {
 public:
  StorageAgent(const DesdParams& desd, std::size_t T, double dt, double rho) : desd_(desd), T_(T), dt_(dt) {
    using Eigen::VectorXd;
    const auto n = static_cast<Eigen::Index>(4 * T);
    const auto m = static_cast<Eigen::Index>(2 * T);
    qp_.b = VectorXd::Zero(m);
    qp_.c = VectorXd::Zero(n);
    qp_.q = VectorXd::Zero(n);
    qp_.lower = VectorXd::Zero(n);
    qp_.upper = VectorXd::Constant(n, kInf);
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t t = 0; t < T; ++t) {
      const auto dyn = static_cast<Eigen::Index>(t);
      const auto link = static_cast<Eigen::Index>(T + t);
      trip.emplace_back(dyn, soc(t), 1.0);
      if (t > 0) {
        trip.emplace_back(dyn, soc(t - 1), -1.0);
      } else {
        qp_.b[dyn] = desd.initial_kwh;
      }
      trip.emplace_back(dyn, dis(t), dt / desd.efficiency);
      trip.emplace_back(dyn, chg(t), -desd.efficiency * dt);
      trip.emplace_back(link, y(t), 1.0);
      trip.emplace_back(link, dis(t), -1.0);
      trip.emplace_back(link, chg(t), 1.0);
      qp_.upper[dis(t)] = desd.rating_kw;
      qp_.upper[chg(t)] = desd.rating_kw;
      qp_.lower[soc(t)] = desd.min_kwh;
      qp_.upper[soc(t)] = desd.max_kwh;
      // Implied by the ratings; kept loose so y never sits on a bound.
      qp_.lower[y(t)] = -2.0 * desd.rating_kw - 1.0;
      qp_.upper[y(t)] = 2.0 * desd.rating_kw + 1.0;
      qp_.q[y(t)] = rho;
    }
    qp_.A.resize(m, n);
    qp_.A.setFromTriplets(trip.begin(), trip.end());
    discharge_.assign(T, 0.0);
    charge_.assign(T, 0.0);
  }

  void set_unit_cost(const Series& unit) {
    for (std::size_t t = 0; t < T_; ++t) {
      qp_.c[dis(t)] = unit[t] * dt_;
      qp_.c[chg(t)] = unit[t] * dt_;
    }
  }

  // Minimizes BDC + rho/2 ||y - target||^2; returns y.
  Series step(const Series& target, double rho, const ipm::Options& opts) {
    for (std::size_t t = 0; t < T_; ++t) {
      qp_.c[y(t)] = -rho * target[t];
    }
    const auto sol = ipm::solve(qp_, opts);
    if (sol.status != ipm::Status::Optimal) {
      throw Error(ErrorCode::SolverStall,
                  "storage agent local step did not converge (primal " +
                      std::to_string(sol.primal_residual) + ", dual " +
                      std::to_string(sol.dual_residual) + ", mu " + std::to_string(sol.mu) +
                      ", iterations " + std::to_string(sol.iterations) + ")");
    }
    Series out(T_);
    for (std::size_t t = 0; t < T_; ++t) {
      discharge_[t] = sol.x[dis(t)];
      charge_[t] = sol.x[chg(t)];
      out[t] = discharge_[t] - charge_[t];
    }
    return out;
  }

  double linear_cost() const {
    double c = 0.0;
    for (std::size_t t = 0; t < T_; ++t) {
      c += qp_.c[dis(t)] * discharge_[t] + qp_.c[chg(t)] * charge_[t];
    }
    return c;
  }

  const Series& discharge() const { return discharge_; }
  const Series& charge() const { return charge_; }
  const DesdParams& desd() const { return desd_; }

 private:
  Eigen::Index dis(std::size_t t) const { return static_cast<Eigen::Index>(t); }
  Eigen::Index chg(std::size_t t) const { return static_cast<Eigen::Index>(T_ + t); }
  Eigen::Index soc(std::size_t t) const { return static_cast<Eigen::Index>(2 * T_ + t); }
  Eigen::Index y(std::size_t t) const { return static_cast<Eigen::Index>(3 * T_ + t); }

  const DesdParams& desd_;
  std::size_t T_;
  double dt_;
  ipm::BoundedQp qp_;
  Series discharge_, charge_;
};

struct Snapshot {
  SocialScheduleOutcome outcome;
  double balance = 0.0;
};

class Network {
 public:
  Network(const MicrogridModel& model, const RgForecastResult& rg, const CodesConfig& cfg,
          std::uint64_t seed, const CodesObserver& obs)
      : model_(model), cfg_(cfg), obs_(obs), rng_(seed), T_(model.horizon.steps),
        dt_(model.horizon.dt), r_(model.user_count()), N_(r_ + 1),
        weights_(metropolis_weights(model.graph)), adj_(model.graph.adjacency()),
        grid_max_(model.grid_max_kw()) {
    offset_.resize(r_);
    storage_.resize(r_);
    for (std::size_t i = 0; i < r_; ++i) {
      const auto rgi = user_rg(model, rg, i);
      offset_[i].resize(T_);
      for (std::size_t t = 0; t < T_; ++t) {
        offset_[i][t] = rgi[t] - model.demands[i][t];
      }
      if (model.users[i].is_active()) {
        storage_[i] = std::make_unique<StorageAgent>(*model.users[i].desd, T_, dt_, cfg.penalty);
      }
    }
    buy_.assign(T_, 0.0);
    sell_.assign(T_, 0.0);
    x_.assign(N_, Series(T_, 0.0));
    for (std::size_t i = 0; i < r_; ++i) {
      x_[i] = offset_[i];
    }
    // Scaled duals start at the mid-tariff price. The tariff is public, and
    // starting at zero would tell the grid agent energy is free.
    u_.assign(N_, Series(T_, 0.0));
    for (std::size_t t = 0; t < T_; ++t) {
      const double mid = 0.5 * (model.prices.buy[t] + model.prices.sell[t]);
      for (auto& u : u_) {
        u[t] = -mid * dt_ / cfg.penalty;
      }
    }
    xbar_.assign(N_, Series(T_, 0.0));
    share_injections(0);
  }

  void set_unit_costs(const std::vector<Series>& unit) {
    for (std::size_t i = 0; i < r_; ++i) {
      if (storage_[i]) {
        storage_[i]->set_unit_cost(unit[i]);
      }
    }
  }

  // One ADMM iteration; returns the largest change of any agent's injection.
  double iterate(int k) {
    const double rho = cfg_.penalty;
    double change = 0.0;
    Series target(T_);
    for (std::size_t i = 0; i < N_; ++i) {
      for (std::size_t t = 0; t < T_; ++t) {
        target[t] = x_[i][t] - xbar_[i][t] - u_[i][t];
      }
      Series next(T_);
      if (i == r_) {
        for (std::size_t t = 0; t < T_; ++t) {
          const auto [a, b] = grid_prox(model_.prices.buy[t], model_.prices.sell[t], dt_, rho,
                                        target[t], grid_max_);
          buy_[t] = a;
          sell_[t] = b;
          next[t] = a - b;
        }
      } else if (storage_[i]) {
        for (std::size_t t = 0; t < T_; ++t) {
          target[t] -= offset_[i][t];
        }
        next = storage_[i]->step(target, rho, cfg_.local_solver);
        for (std::size_t t = 0; t < T_; ++t) {
          next[t] += offset_[i][t];
        }
      } else {
        next = offset_[i];
      }
      for (std::size_t t = 0; t < T_; ++t) {
        change = std::max(change, std::abs(next[t] - x_[i][t]));
      }
      x_[i] = std::move(next);
    }
    share_injections(k);
    for (std::size_t i = 0; i < N_; ++i) {
      for (std::size_t t = 0; t < T_; ++t) {
        u_[i][t] += xbar_[i][t];
      }
    }
    return change;
  }

  double balance_residual() const {
    double worst = 0.0;
    for (std::size_t t = 0; t < T_; ++t) {
      double s = 0.0;
      for (std::size_t i = 0; i < N_; ++i) {
        s += x_[i][t];
      }
      worst = std::max(worst, std::abs(s));
    }
    return worst;
  }

  double iterate_cost() const {
    double c = trading_cost(model_.prices.buy, model_.prices.sell, buy_, sell_, dt_);
    for (const auto& s : storage_) {
      if (s) {
        c += s->linear_cost();
      }
    }
    return c;
  }

  // Grid agent absorbs the residual mismatch it learned through consensus.
  Snapshot finalize() const {
    Snapshot snap;
    auto& out = snap.outcome;
    auto& dec = out.decision;
    dec.grid_buy.resize(T_);
    dec.grid_sell.resize(T_);
    const double n = static_cast<double>(N_);
    for (std::size_t t = 0; t < T_; ++t) {
      const double g = std::clamp(x_[r_][t] - n * xbar_[r_][t], -grid_max_, grid_max_);
      dec.grid_buy[t] = std::max(g, 0.0);
      dec.grid_sell[t] = std::max(-g, 0.0);
    }
    out.trading_cost =
        trading_cost(model_.prices.buy, model_.prices.sell, dec.grid_buy, dec.grid_sell, dt_);
    out.social_cost = out.trading_cost;
    out.bdc_cost.assign(r_, 0.0);
    for (std::size_t i = 0; i < r_; ++i) {
      if (!storage_[i]) {
        continue;
      }
      StorageSchedule s;
      s.user = i;
      const auto& d = storage_[i]->desd();
      s.discharge = storage_[i]->discharge();
      s.charge = storage_[i]->charge();
      for (std::size_t t = 0; t < T_; ++t) {
        s.discharge[t] = std::clamp(s.discharge[t], 0.0, d.rating_kw);
        s.charge[t] = std::clamp(s.charge[t], 0.0, d.rating_kw);
      }
      s.soc = soc_trajectory(d, s.discharge, s.charge, dt_);
      out.bdc_cost[i] = bdc_cost(d.bdc, s.discharge, s.charge, s.soc, d.max_kwh, dt_);
      out.social_cost += out.bdc_cost[i];
      dec.storage.push_back(std::move(s));
    }
    return snap;
  }

  double price_spread() const {
    double worst = 0.0;
    for (std::size_t t = 0; t < T_; ++t) {
      double lo = kInf, hi = -kInf;
      for (std::size_t i = 0; i < N_; ++i) {
        lo = std::min(lo, u_[i][t]);
        hi = std::max(hi, u_[i][t]);
      }
      worst = std::max(worst, (hi - lo) * cfg_.penalty / dt_);
    }
    return worst;
  }

  std::uint64_t messages() const { return messages_; }
  std::uint64_t digest() const { return hash_.value(); }

 private:
  // Averaging consensus on the fresh injections, started from masked values,
  // with the dual prices mixed alongside.
  void share_injections(int k) {
    for (std::size_t i = 0; i < N_; ++i) {
      xbar_[i] = x_[i];
    }
    if (cfg_.mask_scale > 0.0) {
      for (std::size_t i = 0; i < N_; ++i) {
        for (auto j : adj_[i]) {
          if (j <= i) {
            continue;
          }
          const std::uint64_t stream =
              (static_cast<std::uint64_t>(k) << 32) ^ (static_cast<std::uint64_t>(i) << 16) ^ j;
          for (std::size_t t = 0; t < T_; ++t) {
            const double m = cfg_.mask_scale * (2.0 * rng_.uniform(stream, t) - 1.0);
            xbar_[i][t] += m;
            xbar_[j][t] -= m;
          }
        }
      }
    }
    std::vector<Series> next_x(N_), next_u(N_);
    int round = 0;
    while (true) {
      publish(k, round);
      ++round;
      for (std::size_t i = 0; i < N_; ++i) {
        next_x[i] = xbar_[i];
        next_u[i] = u_[i];
        for (auto j : adj_[i]) {
          const double a = weights_.alpha(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
          for (std::size_t t = 0; t < T_; ++t) {
            next_x[i][t] += a * (xbar_[j][t] - xbar_[i][t]);
            next_u[i][t] += a * (u_[j][t] - u_[i][t]);
          }
        }
      }
      xbar_.swap(next_x);
      u_.swap(next_u);
      if (spread() <= cfg_.consensus_tolerance) {
        break;
      }
      if (round >= cfg_.max_consensus_rounds) {
        throw Error(ErrorCode::NoConvergence,
                    "injection consensus did not settle within " +
                        std::to_string(cfg_.max_consensus_rounds) + " rounds");
      }
    }
  }

  double spread() const {
    double worst = 0.0;
    for (std::size_t t = 0; t < T_; ++t) {
      double lo = kInf, hi = -kInf, ulo = kInf, uhi = -kInf;
      for (std::size_t i = 0; i < N_; ++i) {
        lo = std::min(lo, xbar_[i][t]);
        hi = std::max(hi, xbar_[i][t]);
        ulo = std::min(ulo, u_[i][t]);
        uhi = std::max(uhi, u_[i][t]);
      }
      worst = std::max({worst, hi - lo, uhi - ulo});
    }
    return worst;
  }

  void publish(int k, int round) {
    const bool external = obs_.on_message || obs_.log;
    for (std::size_t i = 0; i < N_; ++i) {
      msg_.sender = i;
      msg_.iteration = k;
      msg_.round = round;
      msg_.dual_price.resize(T_);
      msg_.mismatch = xbar_[i];
      for (std::size_t t = 0; t < T_; ++t) {
        msg_.dual_price[t] = -cfg_.penalty * u_[i][t] / dt_;
      }
      hash_.add(msg_.sender);
      hash_.add(msg_.iteration);
      hash_.add(msg_.round);
      hash_.add(msg_.dual_price.data(), T_ * sizeof(double));
      hash_.add(msg_.mismatch.data(), T_ * sizeof(double));
      ++messages_;
      if (external) {
        if (obs_.on_message) {
          obs_.on_message(msg_);
        }
        if (obs_.log) {
          *obs_.log << to_json_line(msg_) << '\n';
        }
      }
    }
  }

  const MicrogridModel& model_;
  const CodesConfig& cfg_;
  const CodesObserver& obs_;
  CounterRng rng_;
  std::size_t T_;
  double dt_;
  std::size_t r_, N_;
  WeightMatrix weights_;
  std::vector<std::vector<std::size_t>> adj_;
  double grid_max_;

  std::vector<Series> offset_;  // R_i - D_i, private to user i
  std::vector<std::unique_ptr<StorageAgent>> storage_;
  Series buy_, sell_;
  std::vector<Series> x_, u_, xbar_;

  RoundMessage msg_;
  Fnv1a hash_;
  std::uint64_t messages_ = 0;
};

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void CodesConfig::validate() const {
  std::vector<Violation> v;
  if (!(penalty > 0.0)) v.push_back({"penalty", "must be > 0"});
  if (max_iterations < 1) v.push_back({"max_iterations", "must be >= 1"});
  if (!(balance_tolerance > 0.0)) v.push_back({"balance_tolerance", "must be > 0"});
  if (!(consensus_tolerance > 0.0)) v.push_back({"consensus_tolerance", "must be > 0"});
  if (max_consensus_rounds < 1) v.push_back({"max_consensus_rounds", "must be >= 1"});
  if (!(mask_scale >= 0.0)) v.push_back({"mask_scale", "must be >= 0"});
  if (max_linearizations < 1) v.push_back({"max_linearizations", "must be >= 1"});
  if (!v.empty()) {
    throw ValidationError(std::move(v));
  }
}

std::string to_json_line(const RoundMessage& msg) {
  std::string s = "{\"sender\":" + std::to_string(msg.sender) +
                  ",\"iteration\":" + std::to_string(msg.iteration) +
                  ",\"round\":" + std::to_string(msg.round) + ",\"dual_price\":[";
  for (std::size_t t = 0; t < msg.dual_price.size(); ++t) {
    s += (t ? "," : "") + format_number(msg.dual_price[t]);
  }
  s += "],\"mismatch\":[";
  for (std::size_t t = 0; t < msg.mismatch.size(); ++t) {
    s += (t ? "," : "") + format_number(msg.mismatch[t]);
  }
  s += "]}";
  return s;
}

CodesRun run_codes(const MicrogridModel& model, const RgForecastResult& rg,
                   const CodesConfig& config, std::uint64_t seed, const CodesObserver& observer) {
  config.validate();
  const auto T = model.horizon.steps;
  const auto r = model.user_count();
  Network net(model, rg, config, seed, observer);

  // Unit BDC per user, frozen at the idle SOC path for the first pass.
  std::vector<Series> unit(r);
  bool all_constant = true;
  for (std::size_t i = 0; i < r; ++i) {
    if (!model.users[i].is_active()) {
      continue;
    }
    const auto& d = *model.users[i].desd;
    all_constant = all_constant && is_constant(d.bdc);
    unit[i].assign(T, unit_bdc(d.bdc, d.max_kwh > 0 ? d.initial_kwh / d.max_kwh : 0.0));
  }

  CodesRun run;
  std::optional<Snapshot> best;
  double previous = kInf;
  int k = 0;
  const int passes = all_constant ? 1 : config.max_linearizations;
  for (int pass = 0; pass < passes; ++pass) {
    net.set_unit_costs(unit);
    bool pass_converged = false;
    for (int it = 0; it < config.max_iterations; ++it) {
      ++k;
      const double change = net.iterate(k);
      const double residual = net.balance_residual();
      run.trace.push_back({k, net.iterate_cost(), residual});
      if (residual <= config.balance_tolerance && change <= config.balance_tolerance) {
        pass_converged = true;
        break;
      }
    }
    Snapshot snap = net.finalize();
    snap.outcome.linearizations = pass + 1;
    run.converged = pass_converged;
    const double cost = snap.outcome.social_cost;
    const bool settled = std::abs(cost - previous) < config.linearization_tol;
    if (!best || cost <= best->outcome.social_cost || !pass_converged) {
      best = std::move(snap);
    }
    previous = cost;
    if (!pass_converged || settled || all_constant) {
      break;
    }
    for (const auto& s : best->outcome.decision.storage) {
      const auto& d = *model.users[s.user].desd;
      for (std::size_t t = 0; t < T; ++t) {
        unit[s.user][t] = unit_bdc(d.bdc, s.soc[t] / d.max_kwh);
      }
    }
  }

  run.outcome = std::move(best->outcome);
  run.outcome.solver_iterations = k;
  run.iterations = k;
  run.ledger.grid_trading_cost = run.outcome.trading_cost;
  run.ledger.storage_cost = run.outcome.bdc_cost;
  run.messages = net.messages();
  run.log_digest = net.digest();
  run.price_spread = net.price_spread();
  if (!run.converged) {
    run.diagnostics = "no convergence after " + std::to_string(k) +
                      " iterations; balance residual " +
                      format_number(run.trace.empty() ? 0.0 : run.trace.back().balance_residual) +
                      " kW";
  }
  return run;
}

std::vector<ConvergencePoint> convergence_trace(const CodesRun& run,
                                                std::optional<double> reference) {
  const double ref = reference.value_or(run.outcome.social_cost);
  std::vector<ConvergencePoint> out;
  out.reserve(run.trace.size());
  for (const auto& p : run.trace) {
    out.push_back({p.iteration, std::abs(p.cost - ref), p.balance_residual});
  }
  return out;
}

PrivacyAuditor::PrivacyAuditor(const MicrogridModel& model, const RgForecastResult& rg)
    : steps_(model.horizon.steps), agents_(model.user_count() + 1) {
  auto keep = [&](const Series& s) {
    if (std::any_of(s.begin(), s.end(), [](double v) { return v != 0.0; })) {
      private_series_.push_back(s);
      Series neg(s.size());
      std::transform(s.begin(), s.end(), neg.begin(), [](double v) { return -v; });
      private_series_.push_back(std::move(neg));
    }
  };
  for (std::size_t i = 0; i < model.user_count(); ++i) {
    const auto rgi = user_rg(model, rg, i);
    keep(model.demands[i]);
    keep(rgi);
    Series net(steps_);
    for (std::size_t t = 0; t < steps_; ++t) {
      net[t] = model.demands[i][t] - rgi[t];
    }
    keep(net);
    if (const auto& d = model.users[i].desd) {
      for (double v : {d->initial_kwh, d->min_kwh, d->max_kwh, d->rating_kw, d->efficiency}) {
        if (v != 0.0) {
          private_scalars_.push_back(v);
        }
      }
    }
  }
}

bool PrivacyAuditor::matches_private(const std::vector<double>& v) const {
  for (const auto& s : private_series_) {
    bool same = s.size() == v.size();
    for (std::size_t t = 0; same && t < v.size(); ++t) {
      same = std::abs(s[t] - v[t]) <= 1e-9 * (1.0 + std::abs(s[t]));
    }
    if (same) {
      return true;
    }
  }
  if (!v.empty() && std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); })) {
    return std::find(private_scalars_.begin(), private_scalars_.end(), v.front()) !=
           private_scalars_.end();
  }
  return false;
}

void PrivacyAuditor::inspect(const RoundMessage& msg) {
  ++result_.messages;
  if (msg.sender >= agents_ || msg.dual_price.size() != steps_ || msg.mismatch.size() != steps_) {
    ++result_.schema_violations;
  }
  if (matches_private(msg.dual_price) || matches_private(msg.mismatch)) {
    ++result_.value_leaks;
  }
}

PrivacyAuditResult audit_message_log(std::istream& log, std::size_t steps, std::size_t agents) {
  static const std::vector<std::string> kFields = {"sender", "iteration", "round", "dual_price",
                                                   "mismatch"};
  PrivacyAuditResult res;
  std::string line;
  while (std::getline(log, line)) {
    if (line.empty()) {
      continue;
    }
    ++res.messages;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    bool ok = j.is_object() && j.size() == kFields.size();
    for (const auto& f : kFields) {
      ok = ok && j.contains(f);
    }
    ok = ok && j["sender"].is_number_unsigned() && j["sender"].get<std::size_t>() < agents;
    for (const char* f : {"dual_price", "mismatch"}) {
      ok = ok && j[f].is_array() && j[f].size() == steps;
      if (ok) {
        for (const auto& v : j[f]) {
          ok = ok && v.is_number();
        }
      }
    }
    if (!ok) {
      ++res.schema_violations;
    }
  }
  return res;
}

}  // namespace gridbargain
