#include <random>

#include "doctest.h"
#include "gridbargain/error.hpp"
#include "gridbargain/model.hpp"
#include "gridbargain/synthetic.hpp"
#include "support.hpp"

using namespace gridbargain;
using testkit::battery;

namespace {

ErrorCode validation_code(MicrogridModel m) {
  try {
    validate_model(std::move(m));
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected validation to fail");
  return ErrorCode::FileError;
}

MicrogridModel two_user_raw() {
  MicrogridModel m;
  m.horizon = {3, 1.0};
  m.users = {testkit::passive("a"), testkit::active("b", battery(1, 0, 2, 1, 0.9, 0.5))};
  m.demands = {{1, 1, 1}, {0.5, 0.5, 0.5}};
  m.prices = {{10, 10, 10}, {8, 8, 8}};
  return m;
}

}  // namespace

TEST_CASE("four-user synthetic instance validates with the stated battery of user 1") {
  const auto m = validate_model(synthetic::four_user_model());
  REQUIRE(m.user_count() == 4);
  const auto& d = *m.users[0].desd;
  CHECK(d.efficiency == doctest::Approx(0.9));
  CHECK(d.min_kwh == doctest::Approx(2.8));
  CHECK(d.max_kwh == doctest::Approx(12.0));
  CHECK_FALSE(m.users[1].is_active());
}

TEST_CASE("passive user with a battery is rejected") {
  auto m = two_user_raw();
  m.users[0].desd = battery(1, 0, 2, 1, 0.9, 0);
  try {
    validate_model(m);
    FAIL("accepted");
  } catch (const ValidationError& e) {
    CHECK(e.code() == ErrorCode::InvariantViolation);
    REQUIRE(e.violations().size() == 1);
    CHECK(e.violations()[0].field == "users[0].desd");
  }
}

TEST_CASE("every violation is reported, not just the first") {
  auto m = two_user_raw();
  m.users[1].desd->efficiency = 1.5;
  m.users[1].desd->rating_kw = 0.0;
  m.prices.sell[1] = -1.0;
  try {
    validate_model(m);
    FAIL("accepted");
  } catch (const ValidationError& e) {
    CHECK(e.violations().size() == 3);
  }
}

TEST_CASE("isolated node makes the graph disconnected") {
  auto m = two_user_raw();
  m.graph.nodes = 3;
  m.graph.edges = {{0, 1}};
  CHECK(validation_code(m) == ErrorCode::DisconnectedGraph);
}

TEST_CASE("SOC bounds and efficiency range are enforced") {
  auto m = two_user_raw();
  m.users[1].desd->initial_kwh = 5.0;  // above E_max
  CHECK(validation_code(m) == ErrorCode::InvariantViolation);
  m = two_user_raw();
  m.users[1].desd->efficiency = 0.0;
  CHECK(validation_code(m) == ErrorCode::InvariantViolation);
  m = two_user_raw();
  m.demands[0] = {1, 1};
  CHECK(validation_code(m) == ErrorCode::InvariantViolation);
}

TEST_CASE("piecewise breakpoints must increase") {
  auto m = two_user_raw();
  m.users[1].desd->bdc = PiecewiseSocBdc{{{0.5, 1.0}, {0.2, 2.0}}};
  CHECK(validation_code(m) == ErrorCode::InvariantViolation);
}

TEST_CASE("defaults: ring graph over users plus grid, non-binding grid limit") {
  const auto m = validate_model(two_user_raw());
  CHECK(m.graph.nodes == 3);
  CHECK(m.graph.edges.size() == 3);
  CHECK(m.graph.connected());
  // peak aggregate demand 1.5, storage rating 1 -> 10 * max(1.5, 1, 1)
  CHECK(m.grid_max_kw() == doctest::Approx(15.0));
}

TEST_CASE("validation is idempotent") {
  const auto once = validate_model(synthetic::four_user_model());
  const auto twice = validate_model(once);
  CHECK(twice.graph.edges == once.graph.edges);
  CHECK(twice.grid_max_kw() == once.grid_max_kw());
  CHECK(twice.demands == once.demands);
  CHECK(twice.prices.buy == once.prices.buy);
}

TEST_CASE("arbitrage warning does not fail validation") {
  auto m = two_user_raw();
  m.prices.sell[2] = 12.0;
  const auto v = validate_model(m);
  CHECK(model_warnings(v).size() == 1);
}

TEST_CASE("soc_trajectory single-step cases") {
  const auto d = battery(2.8, 0, 12, 5, 0.9, 0);
  CHECK(soc_trajectory(d, {0, 0, 0}, {0, 0, 0}, 1.0) == Series{2.8, 2.8, 2.8});
  CHECK(soc_trajectory(d, {0}, {1}, 1.0)[0] == doctest::Approx(3.7));
  CHECK(soc_trajectory(d, {0.9}, {0}, 1.0)[0] == doctest::Approx(1.8));
}

TEST_CASE("soc_trajectory is linear in its inputs") {
  std::mt19937_64 gen(7);
  const auto d = battery(3.0, 0, 10, 5, 0.87, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x1 = testkit::random_vector(gen, 24, 0, 2);
    const auto x2 = testkit::random_vector(gen, 24, 0, 2);
    const auto y1 = testkit::random_vector(gen, 24, 0, 2);
    const auto y2 = testkit::random_vector(gen, 24, 0, 2);
    const double a = std::uniform_real_distribution<double>(0, 3)(gen);
    const double b = std::uniform_real_distribution<double>(0, 3)(gen);
    Series dis(24), chg(24);
    for (std::size_t t = 0; t < 24; ++t) {
      dis[t] = a * x1[t] + b * y1[t];
      chg[t] = a * x2[t] + b * y2[t];
    }
    const auto sx = soc_trajectory(d, x1, x2, 0.5);
    const auto sy = soc_trajectory(d, y1, y2, 0.5);
    const auto s = soc_trajectory(d, dis, chg, 0.5);
    for (std::size_t t = 0; t < 24; ++t) {
      const double expect = a * (sx[t] - 3.0) + b * (sy[t] - 3.0);
      CHECK(s[t] - 3.0 == doctest::Approx(expect).epsilon(1e-12).scale(10));
    }
  }
}

TEST_CASE("unit_bdc step lookup") {
  const BdcModel bdc = PiecewiseSocBdc{{{0.2, 3.0}, {0.5, 1.0}, {0.9, 2.0}}};
  CHECK(unit_bdc(bdc, 0.0) == 3.0);
  CHECK(unit_bdc(bdc, 0.2) == 3.0);
  CHECK(unit_bdc(bdc, 0.49) == 3.0);
  CHECK(unit_bdc(bdc, 0.5) == 1.0);
  CHECK(unit_bdc(bdc, 0.95) == 2.0);
  CHECK(unit_bdc(ConstantBdc{1.25}, 0.3) == 1.25);
}
