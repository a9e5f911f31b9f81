#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gridbargain/model.hpp"

namespace gridbargain {

enum class WeatherKind { Solar, Wind };

/// Forecast distributions over weather classes.
///
/// `solar` is ordered {sunny, cloudy, rainy}; `wind` is ordered by level
/// l1..l4 (higher index = higher wind speed). Either may be empty when no
/// user of that kind exists.
struct WeatherForecast {
  std::vector<double> solar;
  std::vector<double> wind;
};

/// Throws ValidationError if a non-empty distribution is negative or does not
/// sum to 1 within 1e-9.
void validate_forecast(const WeatherForecast& forecast);

/// Historical RG scenarios of one user, partitioned into weather classes.
///
/// Classes are ranked by ascending daily-mean metric: class 0 holds the
/// lowest-generation days (rainy / wind level 1). `conditional[c][k]` is the
/// probability of scenario k given class c.
struct ScenarioPool {
  std::string owner;
  WeatherKind kind = WeatherKind::Solar;
  std::vector<Series> profiles;
  std::vector<std::vector<double>> conditional;

  std::size_t scenario_count() const { return profiles.size(); }
  std::size_t class_count() const { return conditional.size(); }
  std::size_t steps() const { return profiles.empty() ? 0 : profiles.front().size(); }
};

void validate_pool(const ScenarioPool& pool);

enum class ClassMetric { DailyMeanIrradiance, DailyMeanWindSpeed };

enum class ConditionalWeights {
  UniformRandom,  // U[0,1] draws normalized within each class
  UniformEqual,   // 1/|class|
};

struct ClassifyOptions {
  ConditionalWeights weights = ConditionalWeights::UniformRandom;
  std::uint64_t seed = 0;
};

/// Sorts scenarios by daily mean (ties broken by input index) and splits them
/// into `n_classes` contiguous groups whose sizes differ by at most one; the
/// remainder goes to the lowest classes.
ScenarioPool classify_scenarios(std::string owner, std::vector<Series> raw_profiles,
                                ClassMetric metric, std::size_t n_classes,
                                const ClassifyOptions& options = {});

/// Class rank of each scenario in a pool produced by classify_scenarios
/// (the class with non-zero conditional mass).
std::vector<std::size_t> class_labels(const ScenarioPool& pool);

/// Expected RG profile under the forecast:
/// P_R(t) = sum_m pi^m sum_k pi^{k|m} P^k(t).
Series predict_rg(const ScenarioPool& pool, const WeatherForecast& forecast);

struct RgForecastResult {
  std::map<std::string, Series> by_user;
};

RgForecastResult predict_all(const std::vector<ScenarioPool>& pools,
                             const WeatherForecast& forecast);

}  // namespace gridbargain
