#include "gridbargain/rg_forecast.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gridbargain/error.hpp"
#include "gridbargain/rng.hpp"

namespace gridbargain {

namespace {

constexpr double kProbTol = 1e-9;

void check_distribution(std::vector<Violation>& out, const std::vector<double>& p,
                        const std::string& field) {
  if (p.empty()) {
    return;
  }
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) {
      out.push_back({field, "probabilities must be finite and >= 0"});
      return;
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kProbTol) {
    out.push_back({field, "probabilities must sum to 1 (got " + std::to_string(sum) + ")"});
  }
}

double daily_mean(const Series& s) {
  if (s.empty()) {
    return 0.0;
  }
  return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
}

}  // namespace

void validate_forecast(const WeatherForecast& forecast) {
  std::vector<Violation> v;
  check_distribution(v, forecast.solar, "forecast.solar");
  check_distribution(v, forecast.wind, "forecast.wind");
  if (!v.empty()) {
    throw ValidationError(std::move(v));
  }
}

void validate_pool(const ScenarioPool& pool) {
  std::vector<Violation> v;
  const std::string prefix = "pool[" + pool.owner + "]";
  if (pool.profiles.empty()) {
    v.push_back({prefix + ".profiles", "K >= 1"});
  }
  const auto T = pool.steps();
  for (std::size_t k = 0; k < pool.profiles.size(); ++k) {
    const auto& p = pool.profiles[k];
    if (p.size() != T) {
      v.push_back({prefix + ".profiles[" + std::to_string(k) + "]", "equal length"});
    }
    if (std::any_of(p.begin(), p.end(), [](double x) { return !std::isfinite(x) || x < 0.0; })) {
      v.push_back({prefix + ".profiles[" + std::to_string(k) + "]", "values >= 0"});
    }
  }
  if (pool.conditional.empty()) {
    v.push_back({prefix + ".conditional", "at least one class"});
  }
  for (std::size_t c = 0; c < pool.conditional.size(); ++c) {
    const auto& row = pool.conditional[c];
    const std::string field = prefix + ".conditional[" + std::to_string(c) + "]";
    if (row.size() != pool.profiles.size()) {
      v.push_back({field, "one probability per scenario"});
      continue;
    }
    const double sum = std::accumulate(row.begin(), row.end(), 0.0);
    if (std::any_of(row.begin(), row.end(), [](double x) { return !std::isfinite(x) || x < 0.0; })) {
      v.push_back({field, "probabilities >= 0"});
    } else if (sum != 0.0 && std::abs(sum - 1.0) > kProbTol) {
      // An all-zero row is an empty class; it is only an error if the
      // forecast puts mass on it.
      v.push_back({field, "probabilities sum to 1"});
    }
  }
  if (!v.empty()) {
    throw ValidationError(std::move(v));
  }
}

ScenarioPool classify_scenarios(std::string owner, std::vector<Series> raw_profiles,
                                ClassMetric metric, std::size_t n_classes,
                                const ClassifyOptions& options) {
  const auto K = raw_profiles.size();
  if (n_classes == 0 || K < n_classes) {
    throw Error(ErrorCode::TooFewScenarios, "classify_scenarios: " + std::to_string(K) +
                                                " scenarios for " + std::to_string(n_classes) +
                                                " classes");
  }

  std::vector<double> means(K);
  for (std::size_t k = 0; k < K; ++k) {
    means[k] = daily_mean(raw_profiles[k]);
  }
  std::vector<std::size_t> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return means[a] < means[b]; });

  ScenarioPool pool;
  pool.owner = std::move(owner);
  pool.kind = metric == ClassMetric::DailyMeanIrradiance ? WeatherKind::Solar : WeatherKind::Wind;
  pool.profiles = std::move(raw_profiles);
  pool.conditional.assign(n_classes, std::vector<double>(K, 0.0));

  const CounterRng rng(options.seed);
  const std::size_t base = K / n_classes;
  const std::size_t extra = K % n_classes;
  std::size_t pos = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    const std::size_t size = base + (c < extra ? 1 : 0);
    auto& row = pool.conditional[c];
    double total = 0.0;
    for (std::size_t j = pos; j < pos + size; ++j) {
      const auto k = order[j];
      // Keyed by the scenario's input index so the draw does not depend on
      // where the scenario lands in the sort.
      const double wgt = options.weights == ConditionalWeights::UniformEqual
                             ? 1.0
                             : rng.uniform(k, 0);
      row[k] = wgt;
      total += wgt;
    }
    if (total <= 0.0) {
      for (std::size_t j = pos; j < pos + size; ++j) {
        row[order[j]] = 1.0;
      }
      total = static_cast<double>(size);
    }
    for (std::size_t j = pos; j < pos + size; ++j) {
      row[order[j]] /= total;
    }
    pos += size;
  }
  return pool;
}

std::vector<std::size_t> class_labels(const ScenarioPool& pool) {
  std::vector<std::size_t> labels(pool.scenario_count(), 0);
  for (std::size_t c = 0; c < pool.class_count(); ++c) {
    for (std::size_t k = 0; k < pool.scenario_count(); ++k) {
      if (pool.conditional[c][k] > 0.0) {
        labels[k] = c;
      }
    }
  }
  return labels;
}

Series predict_rg(const ScenarioPool& pool, const WeatherForecast& forecast) {
  validate_pool(pool);
  const auto& dist = pool.kind == WeatherKind::Solar ? forecast.solar : forecast.wind;
  const auto n = pool.class_count();
  if (dist.size() != n) {
    throw Error(ErrorCode::KindMismatch,
                "predict_rg: pool '" + pool.owner + "' has " + std::to_string(n) +
                    " weather classes but the " +
                    (pool.kind == WeatherKind::Solar ? "solar" : "wind") + " forecast has " +
                    std::to_string(dist.size()));
  }

  Series out(pool.steps(), 0.0);
  for (std::size_t m = 0; m < n; ++m) {
    const double mass = dist[m];
    if (mass == 0.0) {
      continue;
    }
    // Solar forecasts run sunny -> rainy, i.e. against the ascending rank.
    const std::size_t c = pool.kind == WeatherKind::Solar ? n - 1 - m : m;
    const auto& row = pool.conditional[c];
    if (std::accumulate(row.begin(), row.end(), 0.0) == 0.0) {
      throw Error(ErrorCode::InvariantViolation,
                  "predict_rg: forecast puts mass on empty class " + std::to_string(c));
    }
    for (std::size_t k = 0; k < pool.scenario_count(); ++k) {
      const double wk = mass * row[k];
      if (wk == 0.0) {
        continue;
      }
      const auto& prof = pool.profiles[k];
      for (std::size_t t = 0; t < out.size(); ++t) {
        out[t] += wk * prof[t];
      }
    }
  }
  return out;
}

RgForecastResult predict_all(const std::vector<ScenarioPool>& pools,
                             const WeatherForecast& forecast) {
  validate_forecast(forecast);
  RgForecastResult result;
  for (const auto& pool : pools) {
    result.by_user[pool.owner] = predict_rg(pool, forecast);
  }
  return result;
}

}  // namespace gridbargain
