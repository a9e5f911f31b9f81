#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace gridbargain {

// Nash bargaining split of the social cost with the disagreement point given
// by the declared selfish costs. All costs in cents; negative = profit.

/// S_i = D_i - gamma_i |D_i|. Throws NegativeGamma.
double selfish_cost(double ideal_cost, double gamma);

std::vector<double> selfish_costs(const std::vector<double>& ideal, const std::vector<double>& gamma);

struct AllocationResult {
  std::vector<double> allocated;  // J_i
  double discount = 0.0;          // epsilon, identical for every user
  bool success = false;           // epsilon >= -1e-9
};

/// J_i = S_i - (sum S - J_soc) / r. Returned even when bargaining fails.
AllocationResult allocate(const std::vector<double>& selfish, double social_cost);

/// epsilon^0 = (sum D - J_soc) / r.
double ideal_discount(const std::vector<double>& ideal, double social_cost);

/// Allocation written in terms of the selfish cost reductions:
/// J_i = D_i - gamma_i |D_i| - (r eps0 - R_tot) / r. Must agree with
/// allocate(selfish_costs(D, gamma), J_soc).
AllocationResult adjusted_allocation(const std::vector<double>& ideal,
                                     const std::vector<double>& gamma, double social_cost);

/// R_tot = sum_i gamma_i |D_i|.
double total_reduction(const std::vector<double>& ideal, const std::vector<double>& gamma);

/// sigma_i: total reduction of every user except i.
double others_reduction(const std::vector<double>& ideal, const std::vector<double>& gamma,
                        std::size_t i);

/// Largest gamma_i keeping bargaining alive when user i is the only one
/// adjusting: r eps0 / |D_i|. Throws ZeroIdealCost when D_i = 0.
double gamma_solo_bound(const std::vector<double>& ideal, double eps0, std::size_t i);

/// Half-open interval (lower, upper] of gamma_i.
struct GammaInterval {
  double lower = 0.0;
  double upper = 0.0;

  bool empty() const { return !(lower < upper); }
  bool contains(double gamma) const { return gamma > lower && gamma <= upper; }
};

/// Values of gamma_i for which user i keeps bargaining alive and strictly
/// beats its honest allocation, given the other users' total reduction
/// sigma_i: sigma_i / ((r-1)|D_i|) < gamma_i <= (r eps0 - sigma_i) / |D_i|.
/// Always empty for r = 1. Throws ZeroIdealCost.
GammaInterval manipulation_interval_for_sigma(const std::vector<double>& ideal, double eps0,
                                              double sigma, std::size_t i);

/// Same, with sigma_i computed from the other users' gammas (gamma[i] is ignored).
GammaInterval manipulation_interval(const std::vector<double>& ideal, double eps0,
                                    const std::vector<double>& gamma, std::size_t i);

/// J_i^0 - J_i = gamma_i |D_i| - R_tot / r. Throws BargainingFailed when
/// R_tot > r eps0.
double dishonest_benefit(const std::vector<double>& ideal, double eps0,
                         const std::vector<double>& gamma, std::size_t i);

/// Bargaining survives the reductions: R_tot <= r eps0.
bool bargaining_holds(const std::vector<double>& ideal, double eps0, const std::vector<double>& gamma);

/// gamma_i |D_i| > R_tot / r (the user does better than acting honestly).
bool user_profits(const std::vector<double>& ideal, const std::vector<double>& gamma, std::size_t i);

struct UserResilience {
  double sigma = 0.0;
  std::optional<double> solo_bound;  // none when D_i = 0 (unbounded)
  std::optional<GammaInterval> interval;
  bool profits = false;  // vs the honest baseline under the given gammas
};

struct ResilienceReport {
  std::vector<UserResilience> users;
  double total_reduction = 0.0;  // R_tot
  double total_discount = 0.0;   // r eps0
  bool bargaining_holds = false;
  double max_single_gain = 0.0;  // eps0: best case for a lone manipulator
  // eps0 / (number of dishonest users); nullopt when everyone is honest.
  std::optional<double> average_gain_bound;
};

ResilienceReport resilience_report(const std::vector<double>& ideal, double eps0,
                                   const std::vector<double>& gamma);

enum class RegionPredicate {
  AllDishonestProfit,   // bargaining holds and every dishonest user strictly profits
  BargainingFails,      // R_tot > r eps0
  SucceedsButSomeLose,  // bargaining holds but some dishonest user does not profit
};

/// Classifies one gamma profile (honest users have gamma = 0).
RegionPredicate classify_gamma(const std::vector<double>& ideal, double eps0,
                               const std::vector<double>& gamma,
                               const std::vector<bool>& honest);

struct ProbabilityEstimate {
  double probability = 0.0;
  double standard_error = 0.0;
};

struct RegionEstimate {
  ProbabilityEstimate all_profit;
  ProbabilityEstimate fails;
  ProbabilityEstimate some_lose;
  std::uint64_t samples = 0;
};

struct MonteCarloSpec {
  std::uint64_t samples = 1'000'000;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0 = hardware concurrency
};

/// Every dishonest gamma drawn independently from U[0,1]. Sample n uses the
/// counter-based stream n, so the estimate does not depend on the thread count.
RegionEstimate estimate_regions(const std::vector<double>& ideal, double eps0,
                                const std::vector<bool>& honest, const MonteCarloSpec& spec);

ProbabilityEstimate estimate_region_probability(const std::vector<double>& ideal, double eps0,
                                                const std::vector<bool>& honest,
                                                RegionPredicate predicate,
                                                const MonteCarloSpec& spec);

}  // namespace gridbargain
