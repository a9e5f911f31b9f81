#include <sstream>

#include "doctest.h"
#include "gridbargain/codes.hpp"
#include "gridbargain/error.hpp"
#include "gridbargain/synthetic.hpp"
#include "support.hpp"

using namespace gridbargain;
using testkit::battery;

namespace {

double cost_tol(double reference) { return std::max(0.1, 1e-3 * std::abs(reference)); }

}  // namespace

TEST_CASE("one active user plus the grid reproduces the individual optimum") {
  UserSpec u = testkit::active("a", battery(2.8, 2.8, 12, 5, 0.9, 1.0), {RgType::Pv, 6.5});
  const auto buy = synthetic::time_of_use_buy(24);
  Series sell(24);
  for (int t = 0; t < 24; ++t) sell[t] = 0.8 * buy[t];
  auto m = testkit::make_model({u}, {synthetic::residential_demand(24, 3.0, 0.0, 4)}, buy, sell);
  RgForecastResult rg;
  rg.by_user["a"] = synthetic::pv_pool(24, 6.5, 1, 8)[0];

  const auto run = run_codes(m, rg);
  const double d = solve_individual(m, rg, 0).ideal_selfish_cost;
  CHECK(run.converged);
  CHECK(std::abs(run.outcome.social_cost - d) <= cost_tol(d));
}

TEST_CASE("zero instance converges at once to the idle schedule") {
  auto m = testkit::make_model(
      {testkit::passive("p"), testkit::active("a", battery(1, 1, 5, 2, 0.9, 1.0))},
      {Series(24, 0.0), Series(24, 0.0)}, Series(24, 10), Series(24, 8));
  const auto run = run_codes(m, {});
  CHECK(run.converged);
  CHECK(run.iterations <= 5);
  CHECK(std::abs(run.outcome.social_cost) <= 1e-6);
}

TEST_CASE("random instances agree with the centralized solver") {
  for (std::uint64_t seed = 200; seed < 203; ++seed) {
    CAPTURE(seed);
    const auto inst = synthetic::random_instance(seed);
    const auto oracle = solve_social(inst.model, inst.rg);
    const auto run = run_codes(inst.model, inst.rg);
    CHECK(run.converged);
    CHECK(std::abs(run.outcome.social_cost - oracle.social_cost) <= cost_tol(oracle.social_cost));
    const auto res = testkit::residuals(inst.model, inst.rg, run.outcome.decision);
    CHECK(res.balance <= 1e-6);
    CHECK(res.soc <= 1e-6);
    CHECK(res.rating <= 1e-6);

    // The ledger mirrors the outcome and sums to the social cost.
    double total = run.ledger.grid_trading_cost;
    for (double c : run.ledger.storage_cost) total += c;
    CHECK(total == doctest::Approx(run.outcome.social_cost));
    for (std::size_t i = 0; i < inst.model.user_count(); ++i) {
      if (!inst.model.users[i].is_active()) CHECK(run.ledger.storage_cost[i] == 0.0);
    }

    const double price_tol = CodesConfig{}.penalty * CodesConfig{}.consensus_tolerance / inst.model.horizon.dt;
    CHECK(run.price_spread <= 10 * price_tol);

    const auto trace = convergence_trace(run, oracle.social_cost);
    REQUIRE(trace.size() == static_cast<std::size_t>(run.iterations));
    for (std::size_t k = 1; k < trace.size(); ++k) CHECK(trace[k].iteration == trace[k - 1].iteration + 1);
    CHECK(trace.back().balance_residual <= CodesConfig{}.balance_tolerance);
  }
}

TEST_CASE("identical inputs give an identical message log") {
  const auto inst = synthetic::random_instance(7, {2, 4, 24, 0.2, 3.0});
  std::ostringstream log_a, log_b, log_c;
  const auto a = run_codes(inst.model, inst.rg, {}, 3, {nullptr, &log_a});
  const auto b = run_codes(inst.model, inst.rg, {}, 3, {nullptr, &log_b});
  const auto c = run_codes(inst.model, inst.rg, {}, 4, {nullptr, &log_c});
  CHECK(a.log_digest == b.log_digest);
  CHECK(log_a.str() == log_b.str());
  CHECK(a.outcome.social_cost == b.outcome.social_cost);
  CHECK(a.outcome.decision.grid_buy == b.outcome.decision.grid_buy);
  CHECK(a.messages == b.messages);
  // A different seed changes the masks on the wire but not the answer.
  CHECK(a.log_digest != c.log_digest);
  CHECK(std::abs(a.outcome.social_cost - c.outcome.social_cost) <= cost_tol(a.outcome.social_cost));
}

TEST_CASE("stalled run reports diagnostics and a capped trace") {
  const auto inst = synthetic::random_instance(11);
  CodesConfig cfg;
  cfg.max_iterations = 5;
  const auto run = run_codes(inst.model, inst.rg, cfg);
  CHECK_FALSE(run.converged);
  CHECK(run.trace.size() == 5);
  CHECK_FALSE(run.diagnostics.empty());
}

TEST_CASE("bad configuration is rejected") {
  CodesConfig cfg;
  cfg.penalty = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("message log passes the privacy audit") {
  const auto inst = synthetic::random_instance(21, {3, 5, 24, 0.2, 3.0});
  PrivacyAuditor auditor(inst.model, inst.rg);
  std::ostringstream log;
  CodesObserver obs;
  obs.on_message = [&](const RoundMessage& m) { auditor.inspect(m); };
  obs.log = &log;
  const auto run = run_codes(inst.model, inst.rg, {}, 0, obs);
  CHECK(auditor.result().messages == run.messages);
  CHECK(auditor.result().clean());

  std::istringstream in(log.str());
  const auto audit = audit_message_log(in, 24, inst.model.user_count() + 1);
  CHECK(audit.messages == run.messages);
  CHECK(audit.clean());
}

TEST_CASE("auditor catches planted leaks and schema breaks") {
  const auto inst = synthetic::random_instance(22, {2, 3, 24, 0.2, 3.0});
  PrivacyAuditor auditor(inst.model, inst.rg);
  RoundMessage leak;
  leak.sender = 0;
  leak.dual_price = Series(24, 1.0);
  leak.mismatch = inst.model.demands[0];
  auditor.inspect(leak);
  CHECK(auditor.result().value_leaks == 1);

  RoundMessage battery_param = leak;
  for (std::size_t i = 0; i < inst.model.user_count(); ++i) {
    if (inst.model.users[i].desd) {
      battery_param.mismatch = Series(24, inst.model.users[i].desd->max_kwh);
      break;
    }
  }
  auditor.inspect(battery_param);
  CHECK(auditor.result().value_leaks == 2);

  RoundMessage short_msg = leak;
  short_msg.mismatch.resize(3);
  auditor.inspect(short_msg);
  CHECK(auditor.result().schema_violations == 1);

  std::istringstream extra(
      "{\"sender\":0,\"iteration\":1,\"round\":0,\"dual_price\":[1],\"mismatch\":[2],\"demand\":[3]}\n");
  CHECK(audit_message_log(extra, 1, 2).schema_violations == 1);
}
