#include "gridbargain/pipeline.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "gridbargain/error.hpp"
#include "gridbargain/rng.hpp"

namespace gridbargain::pipeline {

ForecastStage run_forecast(const io::ExperimentConfig& config, const MicrogridModel& model) {
  ForecastStage stage;
  std::vector<Violation> problems;
  for (std::size_t k = 0; k < config.scenarios.size(); ++k) {
    const auto& src = config.scenarios[k];
    const auto field = "scenarios." + src.user;
    std::size_t user = model.user_count();
    for (std::size_t i = 0; i < model.user_count(); ++i) {
      if (model.users[i].id == src.user) {
        user = i;
      }
    }
    if (user == model.user_count()) {
      problems.push_back({field, "no such user in the model"});
      continue;
    }
    const auto& spec = model.users[user];
    const bool solar = src.kind == WeatherKind::Solar;
    if (!spec.has_rg() || (spec.rg.type == RgType::Pv) != solar) {
      problems.push_back({field, "scenario kind does not match the user's RG type"});
      continue;
    }
    const auto& dist = solar ? config.forecast.solar : config.forecast.wind;
    if (dist.empty()) {
      problems.push_back({field, std::string("forecast.") + (solar ? "solar" : "wind") +
                                     " is required for this pool"});
      continue;
    }
    auto profiles = io::load_scenarios(src.path);
    for (const auto& p : profiles) {
      if (p.size() != model.horizon.steps) {
        throw Error(ErrorCode::LengthMismatch,
                    src.path.string() + ": scenario length " + std::to_string(p.size()) +
                        " differs from horizon " + std::to_string(model.horizon.steps));
      }
    }
    ClassifyOptions opts = config.classify;
    opts.seed = CounterRng::mix(config.classify.seed + user + 1);
    stage.pools.push_back(classify_scenarios(
        src.user, std::move(profiles),
        solar ? ClassMetric::DailyMeanIrradiance : ClassMetric::DailyMeanWindSpeed, dist.size(),
        opts));
  }
  for (const auto& u : model.users) {
    if (!u.has_rg()) {
      continue;
    }
    const bool covered = std::any_of(config.scenarios.begin(), config.scenarios.end(),
                                     [&](const io::ScenarioSource& s) { return s.user == u.id; });
    if (!covered) {
      problems.push_back({"scenarios." + u.id, "RG user has no scenario pool"});
    }
  }
  if (!problems.empty()) {
    throw ValidationError(problems);
  }
  stage.rg = predict_all(stage.pools, config.forecast);
  return stage;
}

ScheduleStage run_schedule(const MicrogridModel& model, const RgForecastResult& rg,
                           const io::ExperimentConfig& config, const ScheduleRequest& request) {
  ScheduleStage stage;
  stage.solver = request.solver;
  const bool need_codes =
      request.solver == io::SolverChoice::Distributed || request.verify_oracle;
  const bool need_central =
      request.solver == io::SolverChoice::Centralized || request.verify_oracle;
  std::optional<SocialScheduleOutcome> central;
  if (need_central) {
    central = solve_social(model, rg, config.schedule);
  }
  if (need_codes) {
    stage.codes = run_codes(model, rg, config.codes, request.seed, request.observer);
  }
  if (request.solver == io::SolverChoice::Centralized) {
    stage.social = *central;
    if (stage.codes) {
      stage.other_solver_cost = stage.codes->outcome.social_cost;
    }
  } else {
    stage.social = stage.codes->outcome;
    stage.converged = stage.codes->converged;
    if (central) {
      stage.other_solver_cost = central->social_cost;
    }
  }
  stage.individual = solve_all_individual(model, rg, config.schedule);
  for (const auto& ind : stage.individual) {
    stage.ideal.push_back(ind.ideal_selfish_cost);
  }
  return stage;
}

BargainStage run_bargain(const BargainInput& input) {
  const auto r = input.ideal.size();
  if (input.ids.size() != r) {
    throw Error(ErrorCode::LengthMismatch, "user ids and ideal costs differ in length");
  }
  BargainStage st;
  st.gamma = input.gamma.empty() ? std::vector<double>(r, 0.0) : input.gamma;
  if (st.gamma.size() != r) {
    throw Error(ErrorCode::LengthMismatch, "gamma has " + std::to_string(st.gamma.size()) +
                                               " entries for " + std::to_string(r) + " users");
  }
  st.ideal_allocation = allocate(input.ideal, input.social_cost);
  st.ideal_discount = st.ideal_allocation.discount;
  st.selfish = selfish_costs(input.ideal, st.gamma);
  st.allocation = allocate(st.selfish, input.social_cost);
  st.resilience = resilience_report(input.ideal, st.ideal_discount, st.gamma);
  return st;
}

std::size_t resolve_user(const std::vector<std::string>& ids, const std::string& token) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == token) {
      return i;
    }
  }
  char* end = nullptr;
  const long k = std::strtol(token.c_str(), &end, 10);
  if (!token.empty() && end == token.c_str() + token.size() && k >= 1 &&
      static_cast<std::size_t>(k) <= ids.size()) {
    return static_cast<std::size_t>(k - 1);
  }
  throw ValidationError({{"honest", "unknown user '" + token + "'"}});
}

std::vector<double> parse_list(const std::string& text, const std::string& field) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || end != cell.c_str() + cell.size()) {
      throw ValidationError({{field, "not a number: '" + cell + "'"}});
    }
    out.push_back(v);
  }
  if (out.empty()) {
    throw ValidationError({{field, "empty list"}});
  }
  return out;
}

namespace {

// Visits every point of a steps^k lattice over [0, max]^k in row-major order.
template <class F>
void for_lattice(std::size_t k, std::size_t steps, double max, F&& visit) {
  std::vector<std::size_t> idx(k, 0);
  std::vector<double> g(k, 0.0);
  while (true) {
    for (std::size_t d = 0; d < k; ++d) {
      g[d] = max * static_cast<double>(idx[d]) / static_cast<double>(steps - 1);
    }
    visit(g);
    std::size_t d = k;
    while (d > 0) {
      --d;
      if (++idx[d] < steps) {
        break;
      }
      idx[d] = 0;
      if (d == 0) {
        return;
      }
    }
    if (k == 0) {
      return;
    }
  }
}

ojson interval_json(const GammaInterval& iv) {
  return ojson{{"lower", iv.lower}, {"upper", iv.upper}, {"empty", iv.empty()}};
}

ojson estimate_json(const ProbabilityEstimate& e) {
  return ojson{{"probability", e.probability}, {"stderr", e.standard_error}};
}

}  // namespace

Table gamma_sweep_table(const BargainInput& input, const io::GammaSweep& sweep) {
  const auto r = input.ideal.size();
  Table t;
  for (auto u : sweep.users) {
    if (u >= r) {
      throw ValidationError({{"gamma_sweep.users", "index " + std::to_string(u) + " out of range"}});
    }
    t.header.push_back("gamma_" + input.ids[u]);
  }
  t.header.push_back("total_reduction");
  t.header.push_back("success");
  const double eps0 = ideal_discount(input.ideal, input.social_cost);
  for_lattice(sweep.users.size(), sweep.steps, sweep.max, [&](const std::vector<double>& g) {
    std::vector<double> gamma(r, 0.0);
    for (std::size_t d = 0; d < g.size(); ++d) {
      gamma[sweep.users[d]] = g[d];
    }
    auto row = g;
    row.push_back(total_reduction(input.ideal, gamma));
    row.push_back(bargaining_holds(input.ideal, eps0, gamma) ? 1.0 : 0.0);
    t.rows.push_back(std::move(row));
  });
  return t;
}

Table region_lattice_table(const std::vector<std::string>& ids, const std::vector<double>& ideal,
                           double eps0, const std::vector<bool>& honest, std::size_t steps) {
  const auto r = ideal.size();
  std::vector<std::size_t> dishonest;
  Table t;
  for (std::size_t i = 0; i < r; ++i) {
    if (!honest[i]) {
      dishonest.push_back(i);
      t.header.push_back("gamma_" + ids[i]);
    }
  }
  t.header.insert(t.header.end(), {"bargaining_holds", "all_dishonest_profit", "region"});
  for_lattice(dishonest.size(), steps, 1.0, [&](const std::vector<double>& g) {
    std::vector<double> gamma(r, 0.0);
    for (std::size_t d = 0; d < g.size(); ++d) {
      gamma[dishonest[d]] = g[d];
    }
    const auto region = classify_gamma(ideal, eps0, gamma, honest);
    auto row = g;
    row.push_back(region == RegionPredicate::BargainingFails ? 0.0 : 1.0);
    row.push_back(region == RegionPredicate::AllDishonestProfit ? 1.0 : 0.0);
    row.push_back(static_cast<double>(region));
    t.rows.push_back(std::move(row));
  });
  return t;
}

ojson forecast_json(const MicrogridModel& model, const RgForecastResult& rg) {
  ojson j = ojson::object();
  for (const auto& u : model.users) {
    const auto it = rg.by_user.find(u.id);
    if (it != rg.by_user.end()) {
      j[u.id] = it->second;
    }
  }
  return j;
}

ojson schedule_json(const MicrogridModel& model, const ScheduleStage& stage, bool full) {
  ojson j;
  j["solver"] = io::to_string(stage.solver);
  j["converged"] = stage.converged;
  j["social_cost"] = stage.social.social_cost;
  j["trading_cost"] = stage.social.trading_cost;
  ojson bdc = ojson::object();
  ojson ideal = ojson::object();
  for (std::size_t i = 0; i < model.user_count(); ++i) {
    if (model.users[i].is_active()) {
      bdc[model.users[i].id] = stage.social.bdc_cost[i];
    }
    ideal[model.users[i].id] = stage.ideal[i];
  }
  j["bdc_cost"] = bdc;
  j["ideal_costs"] = ideal;
  j["solver_iterations"] = stage.social.solver_iterations;
  j["linearizations"] = stage.social.linearizations;
  if (stage.codes) {
    char digest[20];
    std::snprintf(digest, sizeof digest, "%016llx",
                  static_cast<unsigned long long>(stage.codes->log_digest));
    j["distributed"] = {{"iterations", stage.codes->iterations},
                        {"converged", stage.codes->converged},
                        {"messages", stage.codes->messages},
                        {"message_digest", digest},
                        {"price_spread", stage.codes->price_spread},
                        {"diagnostics", stage.codes->diagnostics}};
  }
  if (stage.other_solver_cost) {
    j["oracle"] = {{"other_solver_cost", *stage.other_solver_cost},
                   {"cost_gap", stage.social.social_cost - *stage.other_solver_cost}};
  }
  if (full) {
    const auto& d = stage.social.decision;
    ojson dec;
    dec["grid_buy"] = d.grid_buy;
    dec["grid_sell"] = d.grid_sell;
    ojson storage = ojson::object();
    for (const auto& s : d.storage) {
      storage[model.users[s.user].id] = {
          {"discharge", s.discharge}, {"charge", s.charge}, {"soc", s.soc}};
    }
    dec["storage"] = storage;
    j["decision"] = dec;
  }
  return j;
}

ojson bargain_json(const BargainInput& input, const BargainStage& st) {
  ojson j;
  j["users"] = input.ids;
  j["ideal_costs"] = input.ideal;
  j["social_cost"] = input.social_cost;
  j["ideal_discount"] = st.ideal_discount;
  j["ideal_allocation"] = st.ideal_allocation.allocated;
  j["gamma"] = st.gamma;
  j["selfish_costs"] = st.selfish;
  j["discount"] = st.allocation.discount;
  j["allocated"] = st.allocation.allocated;
  j["success"] = st.allocation.success;
  const auto& rr = st.resilience;
  ojson res;
  res["total_reduction"] = rr.total_reduction;
  res["total_discount"] = rr.total_discount;
  res["bargaining_holds"] = rr.bargaining_holds;
  res["max_single_gain"] = rr.max_single_gain;
  res["average_gain_bound"] = rr.average_gain_bound ? ojson(*rr.average_gain_bound) : ojson();
  ojson users = ojson::array();
  for (std::size_t i = 0; i < rr.users.size(); ++i) {
    const auto& u = rr.users[i];
    users.push_back({{"id", input.ids[i]},
                     {"sigma", u.sigma},
                     {"solo_bound", u.solo_bound ? ojson(*u.solo_bound) : ojson()},
                     {"interval", u.interval ? interval_json(*u.interval) : ojson()},
                     {"profits", u.profits}});
  }
  res["users"] = users;
  j["resilience"] = res;
  return j;
}

ojson region_json(const std::vector<std::string>& ids, const std::vector<bool>& honest,
                  const MonteCarloSpec& spec, const RegionEstimate& est) {
  ojson h = ojson::array();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (honest[i]) {
      h.push_back(ids[i]);
    }
  }
  return ojson{{"honest", h},
               {"samples", spec.samples},
               {"seed", spec.seed},
               {"all_dishonest_profit", estimate_json(est.all_profit)},
               {"bargaining_fails", estimate_json(est.fails)},
               {"succeeds_but_some_lose", estimate_json(est.some_lose)}};
}

Table schedule_table(const MicrogridModel& model, const SocialDecision& d) {
  Table t;
  t.header = {"t", "grid_buy", "grid_sell"};
  for (const auto& s : d.storage) {
    const auto& id = model.users[s.user].id;
    t.header.insert(t.header.end(), {id + "_discharge", id + "_charge", id + "_soc"});
  }
  for (std::size_t k = 0; k < d.grid_buy.size(); ++k) {
    std::vector<double> row = {static_cast<double>(k), d.grid_buy[k], d.grid_sell[k]};
    for (const auto& s : d.storage) {
      row.insert(row.end(), {s.discharge[k], s.charge[k], s.soc[k]});
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace gridbargain::pipeline
