#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gridbargain/model.hpp"

namespace gridbargain {

/// Doubly-stochastic mixing matrix over the communication graph.
struct WeightMatrix {
  Eigen::MatrixXd alpha;

  std::size_t size() const { return static_cast<std::size_t>(alpha.rows()); }
};

/// alpha_ij = 1 / (1 + max(deg_i, deg_j)) on edges, alpha_ii = 1 - sum_j alpha_ij.
/// Throws DisconnectedGraph.
WeightMatrix metropolis_weights(const CommGraph& graph);

/// Row/column sums within 1e-12, nonnegative, support on edges and diagonal.
bool is_doubly_stochastic(const WeightMatrix& w, const CommGraph& graph, double tol = 1e-12);

struct ConsensusOptions {
  double tolerance = 1e-9;  // stop when max_i x_i - min_i x_i <= tolerance
  int max_iterations = 100000;
  bool record_trajectory = false;
};

struct ConsensusRun {
  std::vector<double> initial;
  std::vector<double> final_states;
  std::vector<std::vector<double>> trajectory;  // row k = states after k updates
  int iterations = 0;
  bool converged = false;
};

/// x(k+1) = x(k) + sum_j alpha_ij (x_j(k) - x_i(k)). Throws NoConvergence if
/// max_iterations is reached.
ConsensusRun run_average_consensus(const std::vector<double>& x0, const WeightMatrix& w,
                                   const ConsensusOptions& options = {});

/// One synchronous mixing round applied to a block of per-node vectors
/// (`states[i]` is node i's vector); used by the distributed scheduler.
void mix_round(const WeightMatrix& w, std::vector<std::vector<double>>& states);

/// Initial consensus states for cost allocation: S_i for passive users,
/// S_i - C^{i,B} for active users, and -C^P for the grid node (last).
std::vector<double> allocation_initial_states(const std::vector<double>& selfish,
                                              const std::vector<double>& bdc_cost,
                                              const std::vector<bool>& active,
                                              double trading_cost);

/// J_i = S_i - (r+1) xhat_i / r, evaluated by each user from its own state.
std::vector<double> allocate_from_consensus(const std::vector<double>& selfish,
                                            const std::vector<double>& xhat, std::size_t r);

}  // namespace gridbargain
