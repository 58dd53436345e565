#pragma once

#include "cablebot/geometry.hpp"
#include "cablebot/tension_qp.hpp"

#include <string_view>

namespace cablebot {

enum class WireMode { Free, WireVelocity, CogVelocity };

std::string_view to_string(WireMode mode);
/// Throws ConfigError on an unknown name.
WireMode wire_mode_from_string(std::string_view name);

/// Proportional gains, N per (m/s).
struct ControllerGains {
  double kp_wire = 200.0;
  double kp_cog = 200.0;

  void validate() const;
};

/// Winch drive model: tension <-> motor current with Coulomb and
/// load-proportional friction, all friction terms expressed in amperes.
struct WinchModel {
  double radius = 0.0075;     ///< m, 15 mm drum
  VecX torque_constants;      ///< N m / A per wire
  VecX coulomb_current;       ///< i0, A
  VecX load_friction;         ///< i_L, A at full robot weight

  static WinchModel uniform(Eigen::Index m, double radius = 0.0075, double kt = 0.18,
                            double i0 = 0.2, double il = 0.3);
  Eigen::Index size() const { return torque_constants.size(); }
  void validate() const;
  /// Model restricted to the given wire indices.
  WinchModel select(std::span<const int> indices) const;
};

/// Free mode: every winch motor gets 0 A.
VecX free_mode(Eigen::Index wire_count);

/// Equal gravity share plus P tracking of the wire rates, clamped to the box.
/// f_i = M|g|/m + Kp (l_dot_i - l_dot_ref_i)
VecX wire_velocity_tensions(const VecX& l_dot, const VecX& l_dot_ref, double mass,
                            double g_norm, const ControllerGains& gains,
                            const TensionLimits& limits);

/// Gravity term from the QP plus P tracking of the CoG twist mapped to wire
/// rates: f = f_g + Kp (l_dot + W^T q_dot_ref), clamped to the box.
/// Throws StaleJacobian when `qp` or `jac` was computed at another pose.
VecX cog_velocity_tensions(const BodyState& body, const WireJacobian& jac, const VecX& l_dot,
                           const Vec6& q_dot_ref, const TensionSolution& qp,
                           const ControllerGains& gains, const TensionLimits& limits);

/// Tension -> current with friction feed-forward:
/// i = r Kt^-1 f + i0 + i_L |f| / (M|g|), |f| the Euclidean norm over wires.
VecX tension_to_current(const VecX& f_ref, const WinchModel& winch, double mass, double g_norm);

/// Inverse of tension_to_current: the tensions a winch delivers while
/// winding in (friction opposing) for the given currents.
VecX winding_tension(const VecX& currents, const WinchModel& winch, double mass, double g_norm);

/// Recover (Kt, i0, i_L) from threshold currents measured while suspended on
/// one wire: i_up starts the rise, i_down starts the descent, i0 starts
/// winding with no load. Throws NegativeFriction if i_L would be negative.
WinchModel identify_winch(const VecX& i_up, const VecX& i_down, const VecX& i0, double mass,
                          double g_norm, double radius);

}  // namespace cablebot
