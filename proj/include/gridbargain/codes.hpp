#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gridbargain/interior_point.hpp"
#include "gridbargain/model.hpp"
#include "gridbargain/rg_forecast.hpp"
#include "gridbargain/scheduling.hpp"

namespace gridbargain {

// Distributed solution of the social scheduling problem. Every user and the
// grid run an agent; agents only exchange dual-price and mismatch vectors with
// their graph neighbours. Each outer iteration is a sharing-ADMM step: a local
// proximal update of the agent's own injection, averaging consensus on the
// injections (masked with pairwise zero-sum noise), and a price update.

struct CodesConfig {
  double penalty = 1.0;               // rho, cents/kW^2 per step
  int max_iterations = 10000;
  double balance_tolerance = 1e-4;    // kW, primal and step-change residual
  double consensus_tolerance = 1e-10; // spread that ends a consensus phase
  int max_consensus_rounds = 20000;
  double mask_scale = 1.0;            // kW, pairwise privacy masks
  int max_linearizations = 10;        // PiecewiseSoc outer passes
  double linearization_tol = 1e-4;    // cents
  ipm::Options local_solver;

  /// Throws ValidationError.
  void validate() const;
};

/// One neighbour broadcast. Carries nothing but prices and averaged mismatch.
struct RoundMessage {
  std::size_t sender = 0;
  int iteration = 0;
  int round = 0;
  std::vector<double> dual_price;  // cents/kWh
  std::vector<double> mismatch;    // kW, sender's running estimate of the mean injection
};

/// JSON-lines record for a message (fixed field order, %.17g numbers).
std::string to_json_line(const RoundMessage& msg);

struct CodesTracePoint {
  int iteration = 0;
  double cost = 0.0;              // social cost of the current iterate, cents
  double balance_residual = 0.0;  // max_t |sum of injections|, kW
};

struct PrivateLedger {
  double grid_trading_cost = 0.0;          // C^P, held by the grid agent
  std::vector<double> storage_cost;        // C^{i,B}, held by user i (0 if passive)
};

struct CodesRun {
  SocialScheduleOutcome outcome;
  PrivateLedger ledger;
  std::vector<CodesTracePoint> trace;
  bool converged = false;
  int iterations = 0;                // outer iterations over all linearization passes
  std::uint64_t messages = 0;
  std::uint64_t log_digest = 0;      // FNV-1a over every message payload
  double price_spread = 0.0;         // max_t max_ij |lambda_i - lambda_j| at termination
  std::string diagnostics;
};

struct CodesObserver {
  std::function<void(const RoundMessage&)> on_message;
  std::ostream* log = nullptr;  // JSON lines
};

/// Throws DisconnectedGraph. Non-convergence is reported through
/// CodesRun::converged and diagnostics rather than thrown.
CodesRun run_codes(const MicrogridModel& model, const RgForecastResult& rg,
                   const CodesConfig& config = {}, std::uint64_t seed = 0,
                   const CodesObserver& observer = {});

struct ConvergencePoint {
  int iteration = 0;
  double cost_gap = 0.0;
  double balance_residual = 0.0;
};

/// Gap against `reference` (defaults to the run's final social cost).
std::vector<ConvergencePoint> convergence_trace(const CodesRun& run,
                                                std::optional<double> reference = std::nullopt);

struct PrivacyAuditResult {
  std::uint64_t messages = 0;
  std::uint64_t schema_violations = 0;  // wrong lengths, unknown sender
  std::uint64_t value_leaks = 0;        // payload equal to a private series
  bool clean() const { return schema_violations == 0 && value_leaks == 0; }
};

/// Message-bus tap that checks every message against the private series of
/// the instance (demands, RG profiles, net loads, battery parameters).
class PrivacyAuditor {
 public:
  PrivacyAuditor(const MicrogridModel& model, const RgForecastResult& rg);

  void inspect(const RoundMessage& msg);
  const PrivacyAuditResult& result() const { return result_; }

 private:
  bool matches_private(const std::vector<double>& v) const;

  std::size_t steps_;
  std::size_t agents_;
  std::vector<std::vector<double>> private_series_;
  std::vector<double> private_scalars_;
  PrivacyAuditResult result_;
};

/// Checks a JSON-lines message log: every record has exactly the RoundMessage
/// fields with vectors of length `steps`.
PrivacyAuditResult audit_message_log(std::istream& log, std::size_t steps, std::size_t agents);

}  // namespace gridbargain
