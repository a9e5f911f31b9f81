#include "gridbargain/bargaining.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "gridbargain/error.hpp"
#include "gridbargain/rng.hpp"

namespace gridbargain {

namespace {

constexpr double kSuccessTol = 1e-9;

void check_gammas(const std::vector<double>& ideal, const std::vector<double>& gamma) {
  if (gamma.size() != ideal.size()) {
    throw Error(ErrorCode::LengthMismatch, "gamma vector length differs from user count");
  }
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    if (!(gamma[i] >= 0.0)) {
      throw Error(ErrorCode::NegativeGamma,
                  "gamma[" + std::to_string(i) + "] = " + std::to_string(gamma[i]) + " < 0");
    }
  }
}

void check_nonzero(const std::vector<double>& ideal, std::size_t i) {
  if (i >= ideal.size()) {
    throw Error(ErrorCode::LengthMismatch, "user index out of range");
  }
  if (ideal[i] == 0.0) {
    throw Error(ErrorCode::ZeroIdealCost,
                "user " + std::to_string(i) + " has D_i = 0; the bound is unbounded");
  }
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

ProbabilityEstimate estimate(std::uint64_t hits, std::uint64_t n) {
  ProbabilityEstimate e;
  if (n == 0) {
    return e;
  }
  e.probability = static_cast<double>(hits) / static_cast<double>(n);
  e.standard_error = std::sqrt(e.probability * (1.0 - e.probability) / static_cast<double>(n));
  return e;
}

}  // namespace

double selfish_cost(double ideal_cost, double gamma) {
  if (!(gamma >= 0.0)) {
    throw Error(ErrorCode::NegativeGamma, "gamma = " + std::to_string(gamma) + " < 0");
  }
  return ideal_cost - gamma * std::abs(ideal_cost);
}

std::vector<double> selfish_costs(const std::vector<double>& ideal,
                                  const std::vector<double>& gamma) {
  check_gammas(ideal, gamma);
  std::vector<double> s(ideal.size());
  for (std::size_t i = 0; i < ideal.size(); ++i) {
    s[i] = selfish_cost(ideal[i], gamma[i]);
  }
  return s;
}

AllocationResult allocate(const std::vector<double>& selfish, double social_cost) {
  if (selfish.empty()) {
    throw Error(ErrorCode::InvariantViolation, "allocate: at least one player required");
  }
  const double r = static_cast<double>(selfish.size());
  AllocationResult res;
  res.discount = (sum(selfish) - social_cost) / r;
  res.allocated.resize(selfish.size());
  for (std::size_t i = 0; i < selfish.size(); ++i) {
    res.allocated[i] = selfish[i] - res.discount;
  }
  res.success = res.discount >= -kSuccessTol;
  return res;
}

double ideal_discount(const std::vector<double>& ideal, double social_cost) {
  return allocate(ideal, social_cost).discount;
}

double total_reduction(const std::vector<double>& ideal, const std::vector<double>& gamma) {
  check_gammas(ideal, gamma);
  double total = 0.0;
  for (std::size_t i = 0; i < ideal.size(); ++i) {
    total += gamma[i] * std::abs(ideal[i]);
  }
  return total;
}

double others_reduction(const std::vector<double>& ideal, const std::vector<double>& gamma,
                        std::size_t i) {
  check_gammas(ideal, gamma);
  double total = 0.0;
  for (std::size_t j = 0; j < ideal.size(); ++j) {
    if (j != i) {
      total += gamma[j] * std::abs(ideal[j]);
    }
  }
  return total;
}

AllocationResult adjusted_allocation(const std::vector<double>& ideal,
                                     const std::vector<double>& gamma, double social_cost) {
  check_gammas(ideal, gamma);
  const double r = static_cast<double>(ideal.size());
  const double eps0 = ideal_discount(ideal, social_cost);
  const double r_tot = total_reduction(ideal, gamma);
  AllocationResult res;
  res.discount = (r * eps0 - r_tot) / r;
  res.allocated.resize(ideal.size());
  for (std::size_t i = 0; i < ideal.size(); ++i) {
    res.allocated[i] = ideal[i] - gamma[i] * std::abs(ideal[i]) - (r * eps0 - r_tot) / r;
  }
  res.success = res.discount >= -kSuccessTol;
  return res;
}

double gamma_solo_bound(const std::vector<double>& ideal, double eps0, std::size_t i) {
  check_nonzero(ideal, i);
  return static_cast<double>(ideal.size()) * eps0 / std::abs(ideal[i]);
}

GammaInterval manipulation_interval_for_sigma(const std::vector<double>& ideal, double eps0,
                                              double sigma, std::size_t i) {
  check_nonzero(ideal, i);
  const auto r = ideal.size();
  const double mag = std::abs(ideal[i]);
  GammaInterval iv;
  iv.upper = (static_cast<double>(r) * eps0 - sigma) / mag;
  if (r == 1) {
    // A lone player's gain is identically zero.
    iv.lower = iv.upper;
    return iv;
  }
  iv.lower = sigma / (static_cast<double>(r - 1) * mag);
  return iv;
}

GammaInterval manipulation_interval(const std::vector<double>& ideal, double eps0,
                                    const std::vector<double>& gamma, std::size_t i) {
  return manipulation_interval_for_sigma(ideal, eps0, others_reduction(ideal, gamma, i), i);
}

bool bargaining_holds(const std::vector<double>& ideal, double eps0,
                      const std::vector<double>& gamma) {
  const double r = static_cast<double>(ideal.size());
  return total_reduction(ideal, gamma) <= r * eps0 + r * kSuccessTol;
}

bool user_profits(const std::vector<double>& ideal, const std::vector<double>& gamma,
                  std::size_t i) {
  const double r = static_cast<double>(ideal.size());
  return gamma[i] * std::abs(ideal[i]) > total_reduction(ideal, gamma) / r;
}

double dishonest_benefit(const std::vector<double>& ideal, double eps0,
                         const std::vector<double>& gamma, std::size_t i) {
  if (!bargaining_holds(ideal, eps0, gamma)) {
    throw Error(ErrorCode::BargainingFailed,
                "dishonest_benefit: total selfish cost reduction exceeds the cooperation surplus");
  }
  const double r = static_cast<double>(ideal.size());
  return gamma.at(i) * std::abs(ideal[i]) - total_reduction(ideal, gamma) / r;
}

ResilienceReport resilience_report(const std::vector<double>& ideal, double eps0,
                                   const std::vector<double>& gamma) {
  check_gammas(ideal, gamma);
  const auto r = ideal.size();
  ResilienceReport rep;
  rep.total_reduction = total_reduction(ideal, gamma);
  rep.total_discount = static_cast<double>(r) * eps0;
  rep.bargaining_holds = bargaining_holds(ideal, eps0, gamma);
  rep.max_single_gain = eps0;
  const auto dishonest =
      static_cast<std::size_t>(std::count_if(gamma.begin(), gamma.end(), [](double g) { return g > 0.0; }));
  if (dishonest > 0) {
    rep.average_gain_bound = eps0 / static_cast<double>(dishonest);
  }
  for (std::size_t i = 0; i < r; ++i) {
    UserResilience u;
    u.sigma = others_reduction(ideal, gamma, i);
    if (ideal[i] != 0.0) {
      u.solo_bound = gamma_solo_bound(ideal, eps0, i);
      u.interval = manipulation_interval_for_sigma(ideal, eps0, u.sigma, i);
    }
    u.profits = rep.bargaining_holds && user_profits(ideal, gamma, i);
    rep.users.push_back(u);
  }
  return rep;
}

RegionPredicate classify_gamma(const std::vector<double>& ideal, double eps0,
                               const std::vector<double>& gamma,
                               const std::vector<bool>& honest) {
  if (!bargaining_holds(ideal, eps0, gamma)) {
    return RegionPredicate::BargainingFails;
  }
  bool any_dishonest = false;
  for (std::size_t i = 0; i < ideal.size(); ++i) {
    if (honest[i]) {
      continue;
    }
    any_dishonest = true;
    if (!user_profits(ideal, gamma, i)) {
      return RegionPredicate::SucceedsButSomeLose;
    }
  }
  return any_dishonest ? RegionPredicate::AllDishonestProfit
                       : RegionPredicate::SucceedsButSomeLose;
}

RegionEstimate estimate_regions(const std::vector<double>& ideal, double eps0,
                                const std::vector<bool>& honest, const MonteCarloSpec& spec) {
  const auto r = ideal.size();
  if (honest.size() != r) {
    throw Error(ErrorCode::LengthMismatch, "estimate_regions: honest mask length differs from r");
  }
  std::vector<std::size_t> dishonest;
  std::vector<double> mag;
  for (std::size_t i = 0; i < r; ++i) {
    if (!honest[i]) {
      dishonest.push_back(i);
      mag.push_back(std::abs(ideal[i]));
    }
  }
  const double rd = static_cast<double>(r);
  const double limit = rd * eps0 + rd * kSuccessTol;
  const CounterRng rng(spec.seed);

  unsigned threads = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, std::max<std::uint64_t>(1, spec.samples)));

  struct Counts {
    std::uint64_t profit = 0, fail = 0, lose = 0;
  };
  std::vector<Counts> counts(threads);
  auto work = [&](unsigned shard) {
    const std::uint64_t begin = spec.samples * shard / threads;
    const std::uint64_t end = spec.samples * (shard + 1) / threads;
    std::vector<double> scr(dishonest.size());
    Counts c;
    for (std::uint64_t n = begin; n < end; ++n) {
      double r_tot = 0.0;
      for (std::size_t k = 0; k < dishonest.size(); ++k) {
        scr[k] = rng.uniform(n, dishonest[k]) * mag[k];
        r_tot += scr[k];
      }
      if (r_tot > limit) {
        ++c.fail;
        continue;
      }
      bool all = !dishonest.empty();
      for (double s : scr) {
        if (!(rd * s > r_tot)) {
          all = false;
          break;
        }
      }
      if (all) {
        ++c.profit;
      } else {
        ++c.lose;
      }
    }
    counts[shard] = c;
  };

  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned s = 0; s < threads; ++s) {
      pool.emplace_back(work, s);
    }
    for (auto& t : pool) {
      t.join();
    }
  }

  Counts total;
  for (const auto& c : counts) {
    total.profit += c.profit;
    total.fail += c.fail;
    total.lose += c.lose;
  }
  RegionEstimate est;
  est.samples = spec.samples;
  est.all_profit = estimate(total.profit, spec.samples);
  est.fails = estimate(total.fail, spec.samples);
  est.some_lose = estimate(total.lose, spec.samples);
  return est;
}

ProbabilityEstimate estimate_region_probability(const std::vector<double>& ideal, double eps0,
                                                const std::vector<bool>& honest,
                                                RegionPredicate predicate,
                                                const MonteCarloSpec& spec) {
  const auto est = estimate_regions(ideal, eps0, honest, spec);
  switch (predicate) {
    case RegionPredicate::AllDishonestProfit: return est.all_profit;
    case RegionPredicate::BargainingFails: return est.fails;
    case RegionPredicate::SucceedsButSomeLose: return est.some_lose;
  }
  return {};
}

}  // namespace gridbargain
