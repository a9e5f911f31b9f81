#include "gridbargain/interior_point.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gridbargain/error.hpp"

namespace gridbargain::ipm {

namespace {

using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Problem in shifted form: 0 <= x <= u, with fixed columns removed.
struct Reduced {
  SpMat A;
  VectorXd b;
  VectorXd c;
  VectorXd q;
  VectorXd u;
  std::vector<Eigen::Index> keep;  // reduced column -> original column
  VectorXd fixed_x;                // original-space value of every column at its lower bound
};

Reduced reduce(const BoundedQp& p) {
  const auto n = p.c.size();
  Reduced r;
  r.fixed_x = p.lower;
  VectorXd shift_b = p.b - p.A * p.lower;

  for (Eigen::Index j = 0; j < n; ++j) {
    if (!(p.upper[j] - p.lower[j] <= 1e-12)) {
      r.keep.push_back(j);
    }
  }
  const auto nk = static_cast<Eigen::Index>(r.keep.size());
  std::vector<Eigen::Triplet<double>> trip;
  r.c.resize(nk);
  r.q.setZero(nk);
  r.u.resize(nk);
  for (Eigen::Index k = 0; k < nk; ++k) {
    const auto j = r.keep[k];
    for (SpMat::InnerIterator it(p.A, j); it; ++it) {
      trip.emplace_back(it.row(), k, it.value());
    }
    const double qj = p.q.size() ? p.q[j] : 0.0;
    r.q[k] = qj;
    r.c[k] = p.c[j] + qj * p.lower[j];
    r.u[k] = p.upper[j] - p.lower[j];
  }
  r.A.resize(p.A.rows(), nk);
  r.A.setFromTriplets(trip.begin(), trip.end());
  r.b = shift_b;
  return r;
}

double max_step(const VectorXd& v, const VectorXd& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv[i] < 0.0) {
      alpha = std::min(alpha, -v[i] / dv[i]);
    }
  }
  return alpha;
}

double inf_norm(const VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

}  // namespace

Solution solve(const BoundedQp& problem, const Options& options) {
  const Reduced red = reduce(problem);
  const auto m = red.A.rows();
  const auto n = red.A.cols();
  const bool quadratic = red.q.size() && red.q.cwiseAbs().maxCoeff() > 0.0;

  // Finite upper bounds are tracked with slack s and dual w; for infinite
  // ones both stay at zero and are masked out.
  VectorXd has_ub(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    has_ub[j] = std::isfinite(red.u[j]) ? 1.0 : 0.0;
  }
  const double n_ub = has_ub.sum();
  const VectorXd u_fin = has_ub.cwiseProduct(red.u.unaryExpr([](double v) {
    return std::isfinite(v) ? v : 0.0;
  }));

  const double scale_c = std::max(1.0, inf_norm(red.c));
  VectorXd x(n), s(n), z(n), w(n), y = VectorXd::Zero(m);
  for (Eigen::Index j = 0; j < n; ++j) {
    x[j] = has_ub[j] > 0 ? std::min(0.5 * red.u[j], 1.0) : 1.0;
    s[j] = has_ub[j] > 0 ? red.u[j] - x[j] : 1.0;
    z[j] = scale_c;
    w[j] = has_ub[j] > 0 ? scale_c : 0.0;
  }

  const double b_norm = 1.0 + inf_norm(red.b);
  const double c_norm = 1.0 + inf_norm(red.c);
  const SpMat At = red.A.transpose();

  Solution out;
  struct Best {
    double metric = kInf;
    int iter = 0;
    VectorXd x, y;
    double primal = 0.0, dual = 0.0, mu = 0.0;
  } best;
  Eigen::SimplicialLDLT<SpMat> ldlt;
  bool analyzed = false;

  for (int iter = 0; iter <= options.max_iterations; ++iter) {
    const VectorXd r_p = red.b - red.A * x;
    const VectorXd r_u = has_ub.cwiseProduct(u_fin - x - s);
    const VectorXd r_d = red.c + red.q.cwiseProduct(x) - At * y - z + w;
    const double comp = x.dot(z) + has_ub.dot(s.cwiseProduct(w));
    const double mu = comp / (static_cast<double>(n) + n_ub);
    const double pobj = 0.5 * x.dot(red.q.cwiseProduct(x)) + red.c.dot(x);

    out.iterations = iter;
    out.primal_residual = std::max(inf_norm(r_p), inf_norm(r_u));
    out.dual_residual = inf_norm(r_d);
    out.mu = mu;
    const double metric = std::max({out.primal_residual / b_norm, out.dual_residual / c_norm,
                                    comp / (1.0 + std::abs(pobj))});
    if (!std::isfinite(metric)) {
      break;
    }
    if (metric <= options.tolerance) {
      out.status = Status::Optimal;
      break;
    }
    if (metric < best.metric) {
      best = {metric, iter, x, y, out.primal_residual, out.dual_residual, mu};
    } else if (iter - best.iter >= options.stall_iterations) {
      break;
    }
    if (iter == options.max_iterations) {
      out.status = Status::IterationLimit;
      break;
    }

    VectorXd d = red.q + z.cwiseQuotient(x);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (has_ub[j] > 0) {
        d[j] += w[j] / s[j];
      }
    }
    const VectorXd d_inv = d.cwiseInverse();

    const SpMat M0 = red.A * d_inv.asDiagonal() * At;
    SpMat M = M0;
    const double reg = 1e-14 * std::max(1.0, inf_norm(VectorXd(M.diagonal())));
    for (Eigen::Index i = 0; i < m; ++i) {
      M.coeffRef(i, i) += reg;
    }
    if (!analyzed) {
      ldlt.analyzePattern(M);
      analyzed = true;
    }
    ldlt.factorize(M);
    if (ldlt.info() != Eigen::Success) {
      out.status = Status::IterationLimit;
      break;
    }

    struct Step {
      VectorXd dx, ds, dz, dw, dy;
    };
    auto newton = [&](const VectorXd& r_xz, const VectorXd& r_sw) {
      Step st;
      VectorXd r_tilde = -r_d + r_xz.cwiseQuotient(x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (has_ub[j] > 0) {
          r_tilde[j] -= (r_sw[j] - w[j] * r_u[j]) / s[j];
        }
      }
      const VectorXd rhs = r_p - red.A * d_inv.cwiseProduct(r_tilde);
      st.dy = ldlt.solve(rhs);
      for (int k = 0; k < 3; ++k) {
        st.dy += ldlt.solve(VectorXd(rhs - M0 * st.dy));
      }
      st.dx = d_inv.cwiseProduct(r_tilde + At * st.dy);
      st.ds = has_ub.cwiseProduct(r_u - st.dx);
      st.dz = (r_xz - z.cwiseProduct(st.dx)).cwiseQuotient(x);
      st.dw = VectorXd::Zero(n);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (has_ub[j] > 0) {
          st.dw[j] = (r_sw[j] - w[j] * st.ds[j]) / s[j];
        }
      }
      return st;
    };
    auto primal_step = [&](const Step& st) {
      return std::min(max_step(x, st.dx), max_step(s, st.ds));
    };
    auto dual_step = [&](const Step& st) {
      return std::min(max_step(z, st.dz), max_step(w, st.dw));
    };

    const Step aff = newton(-x.cwiseProduct(z), -has_ub.cwiseProduct(s.cwiseProduct(w)));
    double ap = primal_step(aff);
    double ad = dual_step(aff);
    if (quadratic) {
      ap = ad = std::min(ap, ad);
    }
    const double mu_aff =
        ((x + ap * aff.dx).dot(z + ad * aff.dz) +
         has_ub.dot((s + ap * aff.ds).cwiseProduct(w + ad * aff.dw))) /
        (static_cast<double>(n) + n_ub);
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

    const VectorXd r_xz =
        VectorXd::Constant(n, sigma * mu) - x.cwiseProduct(z) - aff.dx.cwiseProduct(aff.dz);
    const VectorXd r_sw = has_ub.cwiseProduct(VectorXd::Constant(n, sigma * mu) -
                                              s.cwiseProduct(w) - aff.ds.cwiseProduct(aff.dw));
    const Step st = newton(r_xz, r_sw);
    ap = std::min(1.0, options.step_fraction * primal_step(st));
    ad = std::min(1.0, options.step_fraction * dual_step(st));
    if (quadratic) {
      ap = ad = std::min(ap, ad);
    }

    x += ap * st.dx;
    s += ap * st.ds;
    y += ad * st.dy;
    z += ad * st.dz;
    w += ad * st.dw;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (has_ub[j] <= 0) {
        s[j] = 1.0;
        w[j] = 0.0;
      }
    }
  }

  if (out.status != Status::Optimal && best.metric < kInf) {
    // Numerical trouble near the solution: fall back to the best iterate seen.
    x = best.x;
    y = best.y;
    out.primal_residual = best.primal;
    out.dual_residual = best.dual;
    out.mu = best.mu;
    if (best.metric <= options.acceptable_tolerance) {
      out.status = Status::Optimal;
    }
  }

  // Map back to the original variable space and clip to the box.
  out.x = red.fixed_x;
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto j = red.keep[k];
    out.x[j] = std::clamp(problem.lower[j] + x[k], problem.lower[j], problem.upper[j]);
  }
  out.y = y;
  const VectorXd q_full = problem.q.size() ? problem.q : VectorXd::Zero(problem.c.size());
  out.objective = 0.5 * out.x.dot(q_full.cwiseProduct(out.x)) + problem.c.dot(out.x);
  return out;
}

double phase_one(const BoundedQp& problem, const Options& options) {
  const auto m = problem.A.rows();
  const auto n = problem.A.cols();
  BoundedQp aux;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(problem.A.nonZeros() + 2 * m);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (SpMat::InnerIterator it(problem.A, j); it; ++it) {
      trip.emplace_back(it.row(), j, it.value());
    }
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    trip.emplace_back(i, n + 2 * i, 1.0);
    trip.emplace_back(i, n + 2 * i + 1, -1.0);
  }
  aux.A.resize(m, n + 2 * m);
  aux.A.setFromTriplets(trip.begin(), trip.end());
  aux.b = problem.b;
  aux.c = VectorXd::Zero(n + 2 * m);
  aux.c.tail(2 * m).setOnes();
  aux.lower = VectorXd::Zero(n + 2 * m);
  aux.lower.head(n) = problem.lower;
  aux.upper = VectorXd::Constant(n + 2 * m, kInf);
  aux.upper.head(n) = problem.upper;
  const auto sol = solve(aux, options);
  if (sol.status != Status::Optimal) {
    throw Error(ErrorCode::SolverStall, "phase-one feasibility LP did not converge");
  }
  return sol.objective;
}

}  // namespace gridbargain::ipm
