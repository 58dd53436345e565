#pragma once

#include "cablebot/geometry.hpp"

namespace cablebot {

inline constexpr double kDefaultRegularization = 1e-3;
inline constexpr double kDefaultMinTension = 2.0;    // N, keeps wires taut
inline constexpr double kDefaultMaxTension = 120.0;  // N, continuous rating of the anchoring winches

/// Per-wire tension box, 0 <= f_min < f_max.
struct TensionLimits {
  VecX f_min;
  VecX f_max;

  static TensionLimits uniform(Eigen::Index m, double lo = kDefaultMinTension,
                               double hi = kDefaultMaxTension);
  /// Throws ConfigError if the box is malformed.
  void validate() const;
  Eigen::Index size() const { return f_min.size(); }
  VecX clamp(const VecX& f) const { return f.cwiseMax(f_min).cwiseMin(f_max); }
};

struct TensionSolution {
  VecX tensions;
  Vec6 residual_wrench = Vec6::Zero();  ///< W f - w
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
  Pose pose;  ///< pose of the Jacobian the solution was computed for
};

struct QpOptions {
  double regularization = kDefaultRegularization;
  int max_iterations = 10000;
  double tolerance = 1e-10;  ///< on the projected-gradient norm
};

/// Wrench the wires must exert to cancel gravity: [-M g; 0].
Vec6 gravity_wrench(double mass, const Vec3& gravity);

/// ||W f - w||^2 + lambda ||f||^2
double tension_objective(const Mat6X& w_matrix, const Vec6& target, const VecX& f,
                         double regularization);

/// Gradient of tension_objective with respect to f.
VecX tension_objective_gradient(const Mat6X& w_matrix, const Vec6& target, const VecX& f,
                                double regularization);

/// Largest violation of the box KKT conditions at f: interior components need
/// a zero gradient, components on the lower bound a non-negative one and
/// components on the upper bound a non-positive one.
double kkt_violation(const Mat6X& w_matrix, const Vec6& target, const TensionLimits& limits,
                     const VecX& f, double regularization);

/// Box-constrained least squares distribution of wire tensions, solved with a
/// projected Newton active-set iteration started at the box midpoint. On
/// hitting the iteration cap the last iterate is returned with
/// converged = false; tensions are always inside the box.
TensionSolution solve_tension_qp(const WireJacobian& jac, const Vec6& target_wrench,
                                 const TensionLimits& limits, const QpOptions& options = {});

TensionSolution solve_tension_qp(const WireJacobian& jac, const Vec6& target_wrench,
                                 const TensionLimits& limits, double regularization);

struct FeasibilityReport {
  bool feasible = false;
  double residual_norm = 0.0;            ///< force part of the residual
  Vec6 residual_wrench = Vec6::Zero();   ///< full W f - w at the force-optimal f
  VecX tensions;
};

/// Point query: can the wires realize the force part of `target_wrench`
/// within the box? Moments are excluded because a suspended body settles
/// its orientation under any unbalanced moment.
FeasibilityReport wrench_feasible(const WireJacobian& jac, const Vec6& target_wrench,
                                  const TensionLimits& limits, double tol);

}  // namespace cablebot
