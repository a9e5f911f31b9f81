#pragma once

#include <string>
#include <vector>

#include "gridbargain/interior_point.hpp"
#include "gridbargain/model.hpp"
#include "gridbargain/rg_forecast.hpp"

namespace gridbargain {

struct ScheduleOptions {
  bool terminal_soc_at_least_initial = false;
  double feasibility_tol = 1e-6;  // kW / kWh
  int max_linearizations = 20;    // PiecewiseSoc outer loop
  double linearization_tol = 1e-4;  // cents
  // Tight enough that sum D_i - J_soc keeps its sign when the two coincide.
  ipm::Options ipm{.max_iterations = 200, .tolerance = 1e-12};
};

struct StorageSchedule {
  std::size_t user = 0;  // index into MicrogridModel::users
  Series discharge;      // P_B^+
  Series charge;         // P_B^-
  Series soc;            // stored energy after each step
};

struct SocialDecision {
  Series grid_buy;   // P_G^+
  Series grid_sell;  // P_G^-
  std::vector<StorageSchedule> storage;  // one per active user, in user order
};

struct SocialScheduleOutcome {
  SocialDecision decision;
  double trading_cost = 0.0;   // C^P_opt
  std::vector<double> bdc_cost;  // C^{i,B}_opt per user (0 for passive users)
  double social_cost = 0.0;    // J_soc
  int solver_iterations = 0;
  int linearizations = 0;
};

struct IndividualOutcome {
  std::size_t user = 0;
  Series grid_buy;   // P_{i,G}^+
  Series grid_sell;  // P_{i,G}^-
  std::optional<StorageSchedule> storage;
  double trading_cost = 0.0;
  double bdc_cost = 0.0;
  double ideal_selfish_cost = 0.0;  // D_i; negative means expected profit
};

/// sum_t (p_b(t) buy(t) - p_s(t) sell(t)) dt
double trading_cost(const Series& p_buy, const Series& p_sell, const Series& buy,
                    const Series& sell, double dt);

/// sum_t c_d(t) (P+(t) + P-(t)) dt, with c_d looked up at soc(t)/capacity.
double bdc_cost(const BdcModel& bdc, const Series& discharge, const Series& charge,
                const Series& soc, double capacity, double dt);

/// RG profile of user i (zeros for users without RG).
Series user_rg(const MicrogridModel& model, const RgForecastResult& rg, std::size_t i);

SocialScheduleOutcome solve_social(const MicrogridModel& model, const RgForecastResult& rg,
                                   const ScheduleOptions& options = {});

IndividualOutcome solve_individual(const MicrogridModel& model, const RgForecastResult& rg,
                                   std::size_t user, const ScheduleOptions& options = {});

std::vector<IndividualOutcome> solve_all_individual(const MicrogridModel& model,
                                                    const RgForecastResult& rg,
                                                    const ScheduleOptions& options = {});

/// Worst-case constraint residuals of a social decision.
struct FeasibilityReport {
  double balance = 0.0;        // max_t |power balance residual|, kW
  double soc = 0.0;            // max SOC bound violation, kWh
  double rating = 0.0;         // max rating/nonnegativity violation, kW
  double grid_overlap = 0.0;   // max_t P_G^+ P_G^-
  double storage_overlap = 0.0;  // max P_B^+ P_B^- over users with positive BDC

  bool within(double tol) const {
    return balance <= tol && soc <= tol && rating <= tol;
  }
};

FeasibilityReport check_social(const MicrogridModel& model, const RgForecastResult& rg,
                               const SocialDecision& decision);

}  // namespace gridbargain
