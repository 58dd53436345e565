#include "cablebot/tension_qp.hpp"

#include "cablebot/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace cablebot {

TensionLimits TensionLimits::uniform(Eigen::Index m, double lo, double hi) {
  return {VecX::Constant(m, lo), VecX::Constant(m, hi)};
}

void TensionLimits::validate() const {
  if (f_min.size() != f_max.size()) {
    throw ConfigError("tension limits: f_min and f_max sizes differ");
  }
  for (Eigen::Index i = 0; i < f_min.size(); ++i) {
    if (!(f_min(i) >= 0.0) || !(f_min(i) < f_max(i))) {
      std::ostringstream msg;
      msg << "tension limits: need 0 <= f_min < f_max, wire " << i << " has [" << f_min(i)
          << ", " << f_max(i) << "]";
      throw ConfigError(msg.str());
    }
  }
}

Vec6 gravity_wrench(double mass, const Vec3& gravity) {
  Vec6 w = Vec6::Zero();
  w.head<3>() = -mass * gravity;
  return w;
}

double tension_objective(const Mat6X& w_matrix, const Vec6& target, const VecX& f,
                         double regularization) {
  return (w_matrix * f - target).squaredNorm() + regularization * f.squaredNorm();
}

VecX tension_objective_gradient(const Mat6X& w_matrix, const Vec6& target, const VecX& f,
                                double regularization) {
  return 2.0 * (w_matrix.transpose() * (w_matrix * f - target) + regularization * f);
}

double kkt_violation(const Mat6X& w_matrix, const Vec6& target, const TensionLimits& limits,
                     const VecX& f, double regularization) {
  const VecX g = tension_objective_gradient(w_matrix, target, f, regularization);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    double v = 0.0;
    if (f(i) < limits.f_min(i) || f(i) > limits.f_max(i)) {
      v = std::max(limits.f_min(i) - f(i), f(i) - limits.f_max(i));
    } else if (f(i) == limits.f_min(i)) {
      v = std::max(0.0, -g(i));
    } else if (f(i) == limits.f_max(i)) {
      v = std::max(0.0, g(i));
    } else {
      v = std::abs(g(i));
    }
    worst = std::max(worst, v);
  }
  return worst;
}

namespace {

// f - P(f - g): zero exactly at a KKT point of the box problem.
VecX projected_gradient(const VecX& f, const VecX& g, const TensionLimits& limits) {
  return f - limits.clamp(f - g);
}

}  // namespace

TensionSolution solve_tension_qp(const WireJacobian& jac, const Vec6& target_wrench,
                                 const TensionLimits& limits, const QpOptions& options) {
  const Eigen::Index m = jac.wire_count();
  if (m < 1) {
    throw ConfigError("solve_tension_qp: no wires");
  }
  if (limits.size() != m) {
    throw ConfigError("solve_tension_qp: limits size does not match wire count");
  }
  limits.validate();
  if (options.regularization < 0.0) {
    throw ConfigError("solve_tension_qp: regularization must be >= 0");
  }

  const Mat6X& w = jac.matrix;
  const double lambda = options.regularization;
  // Objective = f^T H f - 2 c^T f + const, gradient = 2 (H f - c).
  const Eigen::MatrixXd hessian =
      w.transpose() * w + lambda * Eigen::MatrixXd::Identity(m, m);
  const VecX linear = w.transpose() * target_wrench;
  const double scale = 1.0 + linear.norm();

  auto objective = [&](const VecX& f) { return tension_objective(w, target_wrench, f, lambda); };
  auto gradient = [&](const VecX& f) { return VecX(2.0 * (hessian * f - linear)); };

  VecX f = 0.5 * (limits.f_min + limits.f_max);
  double value = objective(f);

  TensionSolution out;
  std::vector<Eigen::Index> free_idx;
  free_idx.reserve(static_cast<std::size_t>(m));

  int it = 0;
  for (; it < options.max_iterations; ++it) {
    const VecX g = gradient(f);
    const double pg = projected_gradient(f, g, limits).norm();
    if (pg < options.tolerance) {
      out.converged = true;
      break;
    }

    // Components held at a bound by a gradient pushing outward stay fixed.
    free_idx.clear();
    for (Eigen::Index i = 0; i < m; ++i) {
      const bool at_lower = f(i) <= limits.f_min(i) && g(i) > 0.0;
      const bool at_upper = f(i) >= limits.f_max(i) && g(i) < 0.0;
      if (!at_lower && !at_upper) {
        free_idx.push_back(i);
      }
    }

    VecX step = VecX::Zero(m);
    if (!free_idx.empty()) {
      const auto nf = static_cast<Eigen::Index>(free_idx.size());
      Eigen::MatrixXd h_ff(nf, nf);
      VecX g_f(nf);
      for (Eigen::Index a = 0; a < nf; ++a) {
        g_f(a) = g(free_idx[static_cast<std::size_t>(a)]);
        for (Eigen::Index b = 0; b < nf; ++b) {
          h_ff(a, b) = hessian(free_idx[static_cast<std::size_t>(a)],
                               free_idx[static_cast<std::size_t>(b)]);
        }
      }
      // Newton step on the free subspace; min-norm solve covers singular blocks.
      VecX d_f = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(h_ff).solve(-0.5 * g_f);
      if (!d_f.allFinite() || d_f.dot(g_f) >= 0.0) {
        d_f = -g_f / (2.0 * std::max(h_ff.diagonal().maxCoeff(), 1e-12));
      }
      for (Eigen::Index a = 0; a < nf; ++a) {
        step(free_idx[static_cast<std::size_t>(a)]) = d_f(a);
      }
    }

    // Projected backtracking (Armijo along the projection arc).
    double alpha = 1.0;
    VecX candidate = f;
    double cand_value = value;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      candidate = limits.clamp(f + alpha * step);
      cand_value = objective(candidate);
      if (cand_value <= value + 1e-4 * g.dot(candidate - f)) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }

    if (!accepted || candidate == f) {
      // No representable descent left: accept if stationary to rounding level.
      if (pg < 1e-9 * scale) {
        out.converged = true;
      }
      break;
    }
    f = candidate;
    value = cand_value;
  }

  out.iterations = it;
  out.tensions = f;
  out.residual_wrench = w * f - target_wrench;
  out.objective = objective(f);
  out.pose = jac.pose;
  return out;
}

TensionSolution solve_tension_qp(const WireJacobian& jac, const Vec6& target_wrench,
                                 const TensionLimits& limits, double regularization) {
  QpOptions options;
  options.regularization = regularization;
  return solve_tension_qp(jac, target_wrench, limits, options);
}

FeasibilityReport wrench_feasible(const WireJacobian& jac, const Vec6& target_wrench,
                                  const TensionLimits& limits, double tol) {
  WireJacobian force_only = jac;
  force_only.matrix.bottomRows<3>().setZero();
  Vec6 force_target = target_wrench;
  force_target.tail<3>().setZero();

  const TensionSolution sol = solve_tension_qp(force_only, force_target, limits, 0.0);

  FeasibilityReport report;
  report.tensions = sol.tensions;
  report.residual_wrench = jac.matrix * sol.tensions - target_wrench;
  report.residual_norm = report.residual_wrench.head<3>().norm();
  report.feasible = report.residual_norm < tol;
  return report;
}

}  // namespace cablebot
