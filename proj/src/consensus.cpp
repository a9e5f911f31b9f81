#include "gridbargain/consensus.hpp"

#include <algorithm>
#include <cmath>

#include "gridbargain/error.hpp"

namespace gridbargain {

namespace {

double spread(const std::vector<double>& x) {
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  return *hi - *lo;
}

}  // namespace

WeightMatrix metropolis_weights(const CommGraph& graph) {
  if (!graph.connected()) {
    throw Error(ErrorCode::DisconnectedGraph, "metropolis_weights: graph is not connected");
  }
  const auto adj = graph.adjacency();
  const auto n = static_cast<Eigen::Index>(graph.nodes);
  WeightMatrix w{Eigen::MatrixXd::Zero(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (auto j : adj[i]) {
      const auto deg = std::max(adj[i].size(), adj[j].size());
      w.alpha(i, static_cast<Eigen::Index>(j)) = 1.0 / (1.0 + static_cast<double>(deg));
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    w.alpha(i, i) = 1.0 - w.alpha.row(i).sum();
  }
  return w;
}

bool is_doubly_stochastic(const WeightMatrix& w, const CommGraph& graph, double tol) {
  const auto n = static_cast<Eigen::Index>(graph.nodes);
  if (w.alpha.rows() != n || w.alpha.cols() != n) {
    return false;
  }
  if ((w.alpha.array() < 0.0).any()) {
    return false;
  }
  const auto adj = graph.adjacency();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(w.alpha.row(i).sum() - 1.0) > tol || std::abs(w.alpha.col(i).sum() - 1.0) > tol) {
      return false;
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      const bool edge = std::binary_search(adj[i].begin(), adj[i].end(), static_cast<std::size_t>(j));
      if (i != j && !edge && w.alpha(i, j) != 0.0) {
        return false;
      }
    }
  }
  return true;
}

ConsensusRun run_average_consensus(const std::vector<double>& x0, const WeightMatrix& w,
                                   const ConsensusOptions& options) {
  const auto n = x0.size();
  if (n != w.size()) {
    throw Error(ErrorCode::LengthMismatch, "run_average_consensus: " + std::to_string(n) +
                                               " states for " + std::to_string(w.size()) +
                                               " nodes");
  }
  ConsensusRun run;
  run.initial = x0;
  std::vector<double> x = x0;
  std::vector<double> next(n);
  if (options.record_trajectory) {
    run.trajectory.push_back(x);
  }
  while (spread(x) > options.tolerance) {
    if (run.iterations >= options.max_iterations) {
      run.final_states = x;
      throw Error(ErrorCode::NoConvergence, "average consensus did not converge in " +
                                                std::to_string(options.max_iterations) +
                                                " iterations (spread " +
                                                std::to_string(spread(x)) + ")");
    }
    for (std::size_t i = 0; i < n; ++i) {
      double acc = x[i];
      for (std::size_t j = 0; j < n; ++j) {
        const double a = w.alpha(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (j != i && a != 0.0) {
          acc += a * (x[j] - x[i]);
        }
      }
      next[i] = acc;
    }
    x.swap(next);
    ++run.iterations;
    if (options.record_trajectory) {
      run.trajectory.push_back(x);
    }
  }
  run.final_states = std::move(x);
  run.converged = true;
  return run;
}

void mix_round(const WeightMatrix& w, std::vector<std::vector<double>>& states) {
  const auto n = states.size();
  std::vector<std::vector<double>> next = states;
  for (std::size_t i = 0; i < n; ++i) {
    auto& out = next[i];
    for (std::size_t j = 0; j < n; ++j) {
      const double a = w.alpha(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (j == i || a == 0.0) {
        continue;
      }
      for (std::size_t t = 0; t < out.size(); ++t) {
        out[t] += a * (states[j][t] - states[i][t]);
      }
    }
  }
  states.swap(next);
}

std::vector<double> allocation_initial_states(const std::vector<double>& selfish,
                                              const std::vector<double>& bdc_cost,
                                              const std::vector<bool>& active,
                                              double trading_cost) {
  const auto r = selfish.size();
  if (bdc_cost.size() != r || active.size() != r) {
    throw Error(ErrorCode::LengthMismatch, "allocation_initial_states: inconsistent user counts");
  }
  std::vector<double> x0(r + 1);
  for (std::size_t i = 0; i < r; ++i) {
    x0[i] = active[i] ? selfish[i] - bdc_cost[i] : selfish[i];
  }
  x0[r] = -trading_cost;
  return x0;
}

std::vector<double> allocate_from_consensus(const std::vector<double>& selfish,
                                            const std::vector<double>& xhat, std::size_t r) {
  if (selfish.size() != r || xhat.size() < r) {
    throw Error(ErrorCode::LengthMismatch, "allocate_from_consensus: inconsistent sizes");
  }
  std::vector<double> J(r);
  const double scale = static_cast<double>(r + 1) / static_cast<double>(r);
  for (std::size_t i = 0; i < r; ++i) {
    J[i] = selfish[i] - scale * xhat[i];
  }
  return J;
}

}  // namespace gridbargain
