#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace gridbargain::ipm {

// Convex QP with a diagonal Hessian and box bounds:
//
//   minimize    0.5 x' diag(q) x + c' x
//   subject to  A x = b,  lower <= x <= upper
//
// `lower` must be finite; `upper` entries may be +infinity. An empty `q`
// means a pure LP.
struct BoundedQp {
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  Eigen::VectorXd q;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct Options {
  int max_iterations = 200;
  double tolerance = 1e-10;  // relative primal, dual and complementarity tolerance
  // Accepted when progress stalls (no better iterate for `stall_iterations`).
  double acceptable_tolerance = 1e-8;
  int stall_iterations = 10;
  double step_fraction = 0.995;
};

enum class Status { Optimal, IterationLimit, Infeasible };

struct Solution {
  Status status = Status::IterationLimit;
  Eigen::VectorXd x;
  Eigen::VectorXd y;  // equality multipliers
  double objective = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;  // ||Ax - b||_inf
  double dual_residual = 0.0;
  double mu = 0.0;
};

/// Mehrotra predictor-corrector primal-dual interior point method.
/// Does not detect infeasibility; see `phase_one`.
Solution solve(const BoundedQp& problem, const Options& options = {});

/// Minimum total constraint violation sum |A x - b| over the box, found by an
/// auxiliary LP with artificial variables on every equality row.
double phase_one(const BoundedQp& problem, const Options& options = {});

}  // namespace gridbargain::ipm
