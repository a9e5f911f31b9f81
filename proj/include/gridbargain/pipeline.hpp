#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridbargain/bargaining.hpp"
#include "gridbargain/codes.hpp"
#include "gridbargain/io.hpp"
#include "json.hpp"

namespace gridbargain::pipeline {

using ojson = nlohmann::ordered_json;

struct ForecastStage {
  std::vector<ScenarioPool> pools;
  RgForecastResult rg;
};

/// Classifies every configured pool (class count = length of the matching
/// forecast vector) and predicts each RG user's profile.
ForecastStage run_forecast(const io::ExperimentConfig& config, const MicrogridModel& model);

struct ScheduleRequest {
  io::SolverChoice solver = io::SolverChoice::Centralized;
  bool verify_oracle = false;
  std::uint64_t seed = 0;
  CodesObserver observer;
};

struct ScheduleStage {
  io::SolverChoice solver = io::SolverChoice::Centralized;
  SocialScheduleOutcome social;
  std::vector<IndividualOutcome> individual;
  std::vector<double> ideal;  // D_i
  std::optional<CodesRun> codes;
  std::optional<double> other_solver_cost;  // with verify_oracle
  bool converged = true;
};

ScheduleStage run_schedule(const MicrogridModel& model, const RgForecastResult& rg,
                           const io::ExperimentConfig& config, const ScheduleRequest& request);

struct BargainInput {
  std::vector<std::string> ids;
  std::vector<double> ideal;  // D_i
  double social_cost = 0.0;   // J_soc
  std::vector<double> gamma;  // empty = all honest
};

struct BargainStage {
  double ideal_discount = 0.0;  // eps0
  AllocationResult ideal_allocation;
  std::vector<double> gamma;
  std::vector<double> selfish;
  AllocationResult allocation;
  ResilienceReport resilience;
};

/// Throws LengthMismatch / NegativeGamma.
BargainStage run_bargain(const BargainInput& input);

/// Accepts a user id or a 1-based index. Throws ValidationError.
std::size_t resolve_user(const std::vector<std::string>& ids, const std::string& token);

/// Parses "a,b,c" into numbers. Throws ValidationError naming `field`.
std::vector<double> parse_list(const std::string& text, const std::string& field);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// One row per lattice point: swept gammas, R_tot, success flag (0/1).
Table gamma_sweep_table(const BargainInput& input, const io::GammaSweep& sweep);

/// Lattice over the dishonest users' gammas in [0,1]: gammas, then flags
/// bargaining_holds, all_dishonest_profit, and region code
/// (0 = all profit, 1 = fails, 2 = succeeds but some lose).
Table region_lattice_table(const std::vector<std::string>& ids, const std::vector<double>& ideal,
                           double eps0, const std::vector<bool>& honest, std::size_t steps);

ojson forecast_json(const MicrogridModel& model, const RgForecastResult& rg);
ojson schedule_json(const MicrogridModel& model, const ScheduleStage& stage, bool full);
ojson bargain_json(const BargainInput& input, const BargainStage& stage);
ojson region_json(const std::vector<std::string>& ids, const std::vector<bool>& honest,
                  const MonteCarloSpec& spec, const RegionEstimate& estimate);

/// Rows t, grid_buy, grid_sell, then discharge/charge/soc per storage user.
Table schedule_table(const MicrogridModel& model, const SocialDecision& decision);

}  // namespace gridbargain::pipeline
