#include <numeric>
#include <random>

#include "doctest.h"
#include "gridbargain/bargaining.hpp"
#include "gridbargain/consensus.hpp"
#include "gridbargain/error.hpp"
#include "gridbargain/reference_cases.hpp"
#include "gridbargain/synthetic.hpp"
#include "support.hpp"

using namespace gridbargain;

namespace {

CommGraph path2() { return {2, {{0, 1}}}; }

CommGraph star4() { return {4, {{0, 1}, {0, 2}, {0, 3}}}; }

double spread(const std::vector<double>& x) {
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  return *hi - *lo;
}

}  // namespace

TEST_CASE("Metropolis weights on small graphs") {
  const auto w2 = metropolis_weights(path2());
  CHECK(w2.alpha(0, 1) == doctest::Approx(0.5));
  CHECK(w2.alpha(0, 0) == doctest::Approx(0.5));

  const auto ring = metropolis_weights(ring_graph(5));
  for (int i = 0; i < 5; ++i) {
    CHECK(ring.alpha(i, i) == doctest::Approx(1.0 / 3.0));
    CHECK(ring.alpha(i, (i + 1) % 5) == doctest::Approx(1.0 / 3.0));
    CHECK(ring.alpha(i, (i + 2) % 5) == 0.0);
  }
}

TEST_CASE("star weights match the per-edge rule by hand") {
  const auto w = metropolis_weights(star4());
  // hub degree 3, leaves degree 1: each edge 1/(1+3)
  for (int leaf = 1; leaf < 4; ++leaf) {
    CHECK(w.alpha(0, leaf) == doctest::Approx(0.25));
    CHECK(w.alpha(leaf, 0) == doctest::Approx(0.25));
    CHECK(w.alpha(leaf, leaf) == doctest::Approx(0.75));
  }
  CHECK(w.alpha(0, 0) == doctest::Approx(0.25));
  CHECK(w.alpha(1, 2) == 0.0);
  CHECK(is_doubly_stochastic(w, star4()));
}

TEST_CASE("disconnected graph is refused") {
  try {
    metropolis_weights({4, {{0, 1}, {2, 3}}});
    FAIL("accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DisconnectedGraph);
  }
}

TEST_CASE("consensus trivial cases") {
  const auto w = metropolis_weights(path2());
  const auto same = run_average_consensus({3.0, 3.0}, w);
  CHECK(same.iterations == 0);
  CHECK(same.converged);
  const auto two = run_average_consensus({0.0, 10.0}, w);
  CHECK(two.final_states[0] == doctest::Approx(5.0));
  CHECK(two.final_states[1] == doctest::Approx(5.0));
}

TEST_CASE("random connected graphs: doubly stochastic, conserved sum, shrinking spread") {
  std::mt19937_64 gen(17);
  for (std::uint64_t g = 0; g < 100; ++g) {
    const std::size_t n = 2 + gen() % 11;
    const auto graph = synthetic::random_connected_graph(n, g, 0.3);
    const auto w = metropolis_weights(graph);
    CHECK(is_doubly_stochastic(w, graph));

    // Per-edge rule evaluated independently from the edge list.
    std::vector<std::size_t> deg(n, 0);
    for (auto [a, b] : graph.edges) ++deg[a], ++deg[b];
    for (auto [a, b] : graph.edges) {
      CHECK(w.alpha(a, b) == doctest::Approx(1.0 / (1.0 + std::max(deg[a], deg[b]))));
    }

    const auto x0 = testkit::random_vector(gen, n, -100, 100);
    const double mean = std::accumulate(x0.begin(), x0.end(), 0.0) / n;
    ConsensusOptions opts;
    opts.record_trajectory = true;
    const auto run = run_average_consensus(x0, w, opts);
    REQUIRE(run.converged);
    CHECK(spread(run.final_states) <= 1e-9);
    for (double v : run.final_states) CHECK(std::abs(v - mean) <= 1e-9);

    const double sum0 = std::accumulate(x0.begin(), x0.end(), 0.0);
    double prev = spread(x0);
    for (const auto& row : run.trajectory) {
      CHECK(std::abs(std::accumulate(row.begin(), row.end(), 0.0) - sum0) <= 1e-9);
      const double s = spread(row);
      CHECK(s <= prev + 1e-12);
      prev = s;
    }
  }
}

TEST_CASE("mix_round preserves the column sums of a vector block") {
  const auto w = metropolis_weights(ring_graph(4));
  std::vector<std::vector<double>> states = {{1, 2}, {3, 4}, {5, 6}, {7, 9}};
  mix_round(w, states);
  double a = 0, b = 0;
  for (const auto& s : states) a += s[0], b += s[1];
  CHECK(a == doctest::Approx(16.0));
  CHECK(b == doctest::Approx(21.0));
  CHECK(states[0][0] == doctest::Approx((1.0 + 3.0 + 7.0) / 3.0));
}

TEST_CASE("published four-user case: average of the ring states and local allocation") {
  const auto c = reference::case_w1();
  const std::vector<bool> active = {true, false, true, true};
  // Any split of J_soc into storage and trading costs gives the same average.
  for (const auto& bdc : {std::vector<double>{5.0, 0.0, 7.5, 2.0}, std::vector<double>{0, 0, 0, 0},
                          std::vector<double>{40.0, 0.0, 12.0, 11.0}}) {
    const double storage = bdc[0] + bdc[2] + bdc[3];
    const auto x0 = allocation_initial_states(c.ideal, bdc, active, c.social_cost - storage);
    CHECK(x0.back() == doctest::Approx(storage - c.social_cost));
    const auto run = run_average_consensus(x0, metropolis_weights(ring_graph(5)));
    CHECK(run.iterations <= 200);
    for (double v : run.final_states) CHECK(v == doctest::Approx(59.31 / 5.0).epsilon(1e-9));

    const auto j = allocate_from_consensus(c.ideal, run.final_states, 4);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(std::abs(j[i] - c.allocated[i]) <= 0.01);
    }
    CHECK(j[0] == doctest::Approx(-61.33 - 5.0 * 11.862 / 4.0).epsilon(1e-9));
  }
}

TEST_CASE("zero average leaves selfish costs unchanged") {
  const std::vector<double> s = {1, -2, 3};
  CHECK(allocate_from_consensus(s, {0, 0, 0, 0}, 3) == s);
}

TEST_CASE("consensus allocation equals the direct split on random inputs") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t r = 1 + gen() % 8;
    const auto s = testkit::random_vector(gen, r, -200, 500);
    const auto bdc = testkit::random_vector(gen, r, 0, 30);
    std::vector<bool> active(r);
    double storage = 0;
    for (std::size_t i = 0; i < r; ++i) {
      active[i] = gen() % 2;
      if (active[i]) storage += bdc[i];
    }
    const double jsoc = std::accumulate(s.begin(), s.end(), 0.0) -
                        std::uniform_real_distribution<double>(0, 100)(gen);
    const auto x0 = allocation_initial_states(s, bdc, active, jsoc - storage);
    const auto graph = synthetic::random_connected_graph(r + 1, trial, 0.4);
    const auto run = run_average_consensus(x0, metropolis_weights(graph));
    const auto j = allocate_from_consensus(s, run.final_states, r);
    const auto direct = allocate(s, jsoc);
    const double tol = (r + 1) * 1e-9 * 2;
    CHECK(testkit::max_abs_diff(j, direct.allocated) <= tol);
    CHECK(std::abs(std::accumulate(j.begin(), j.end(), 0.0) - jsoc) <= (r + 1) * tol);
    for (std::size_t i = 0; i < r; ++i) {
      CHECK(std::abs((s[i] - j[i]) - direct.discount) <= tol);
    }
  }
}
