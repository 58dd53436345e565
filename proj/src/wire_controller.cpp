#include "cablebot/wire_controller.hpp"

#include "cablebot/errors.hpp"

#include <cmath>
#include <sstream>

namespace cablebot {

std::string_view to_string(WireMode mode) {
  switch (mode) {
    case WireMode::Free:
      return "Free";
    case WireMode::WireVelocity:
      return "WireVelocity";
    case WireMode::CogVelocity:
      return "CogVelocity";
  }
  return "Free";
}

WireMode wire_mode_from_string(std::string_view name) {
  if (name == "Free") return WireMode::Free;
  if (name == "WireVelocity") return WireMode::WireVelocity;
  if (name == "CogVelocity") return WireMode::CogVelocity;
  throw ConfigError("unknown wire mode '" + std::string(name) + "'");
}

void ControllerGains::validate() const {
  if (!(kp_wire > 0.0) || !(kp_cog > 0.0)) {
    throw ConfigError("controller gains must be positive");
  }
}

WinchModel WinchModel::uniform(Eigen::Index m, double radius, double kt, double i0, double il) {
  WinchModel w;
  w.radius = radius;
  w.torque_constants = VecX::Constant(m, kt);
  w.coulomb_current = VecX::Constant(m, i0);
  w.load_friction = VecX::Constant(m, il);
  return w;
}

void WinchModel::validate() const {
  if (!(radius > 0.0)) {
    throw ConfigError("winch radius must be positive");
  }
  const auto m = torque_constants.size();
  if (coulomb_current.size() != m || load_friction.size() != m) {
    throw ConfigError("winch parameter vectors differ in size");
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(torque_constants(i) > 0.0) || !(coulomb_current(i) >= 0.0) ||
        !(load_friction(i) >= 0.0)) {
      std::ostringstream msg;
      msg << "winch " << i << ": need Kt > 0, i0 >= 0, i_L >= 0";
      throw ConfigError(msg.str());
    }
  }
}

WinchModel WinchModel::select(std::span<const int> indices) const {
  WinchModel out;
  out.radius = radius;
  const auto n = static_cast<Eigen::Index>(indices.size());
  out.torque_constants.resize(n);
  out.coulomb_current.resize(n);
  out.load_friction.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const int i = indices[static_cast<std::size_t>(k)];
    out.torque_constants(k) = torque_constants(i);
    out.coulomb_current(k) = coulomb_current(i);
    out.load_friction(k) = load_friction(i);
  }
  return out;
}

VecX free_mode(Eigen::Index wire_count) { return VecX::Zero(wire_count); }

VecX wire_velocity_tensions(const VecX& l_dot, const VecX& l_dot_ref, double mass,
                            double g_norm, const ControllerGains& gains,
                            const TensionLimits& limits) {
  const Eigen::Index m = l_dot.size();
  if (m < 1 || l_dot_ref.size() != m || limits.size() != m) {
    throw ConfigError("wire_velocity_tensions: size mismatch or no wires");
  }
  const double total = mass * g_norm;
  const double share = total / static_cast<double>(m);
  VecX f(m);
  double assigned = 0.0;
  for (Eigen::Index i = 0; i + 1 < m; ++i) {
    f(i) = share;
    assigned += share;
  }
  // The last share absorbs the rounding so the shares sum to M|g| exactly.
  f(m - 1) = m == 1 ? total : total - assigned;
  f += gains.kp_wire * (l_dot - l_dot_ref);
  return limits.clamp(f);
}

VecX cog_velocity_tensions(const BodyState& body, const WireJacobian& jac, const VecX& l_dot,
                           const Vec6& q_dot_ref, const TensionSolution& qp,
                           const ControllerGains& gains, const TensionLimits& limits) {
  constexpr double kPoseTolerance = 1e-6;
  const Pose now = Pose::of(body);
  if (qp.pose.distance_to(now) > kPoseTolerance || jac.pose.distance_to(now) > kPoseTolerance) {
    throw StaleJacobian("gravity term or Jacobian computed at a different pose");
  }
  const Eigen::Index m = jac.wire_count();
  if (l_dot.size() != m || qp.tensions.size() != m || limits.size() != m) {
    throw ConfigError("cog_velocity_tensions: size mismatch");
  }
  const VecX f = qp.tensions + gains.kp_cog * (l_dot + jac.matrix.transpose() * q_dot_ref);
  return limits.clamp(f);
}

VecX tension_to_current(const VecX& f_ref, const WinchModel& winch, double mass, double g_norm) {
  if (winch.size() != f_ref.size()) {
    throw ConfigError("tension_to_current: winch model size mismatch");
  }
  const double weight = mass * g_norm;
  const double load = weight > 0.0 ? f_ref.norm() / weight : 0.0;
  return winch.radius * f_ref.cwiseQuotient(winch.torque_constants) + winch.coulomb_current +
         winch.load_friction * load;
}

VecX winding_tension(const VecX& currents, const WinchModel& winch, double mass, double g_norm) {
  if (winch.size() != currents.size()) {
    throw ConfigError("winding_tension: winch model size mismatch");
  }
  // f = b - c |f| with b = (Kt/r)(i - i0), c = (Kt/r) i_L / (M|g|).
  const VecX gain = winch.torque_constants / winch.radius;
  const VecX b = gain.cwiseProduct(currents - winch.coulomb_current);
  const double weight = mass * g_norm;
  if (!(weight > 0.0)) {
    return b;
  }
  const VecX c = gain.cwiseProduct(winch.load_friction) / weight;
  const double a = 1.0 - c.squaredNorm();
  if (!(a > 0.0)) {
    throw ConfigError("winding_tension: load friction too large to invert");
  }
  // Non-negative root of a n^2 + 2 (b.c) n - |b|^2 = 0.
  const double bc = b.dot(c);
  const double bb = b.squaredNorm();
  const double disc = std::sqrt(bc * bc + a * bb);
  const double n = bc >= 0.0 ? bb / (bc + disc) : (disc - bc) / a;
  return b - c * n;
}

WinchModel identify_winch(const VecX& i_up, const VecX& i_down, const VecX& i0, double mass,
                          double g_norm, double radius) {
  const Eigen::Index m = i_up.size();
  if (i_down.size() != m || i0.size() != m) {
    throw ConfigError("identify_winch: measurement vectors differ in size");
  }
  if (!(mass > 0.0) || !(g_norm > 0.0) || !(radius > 0.0)) {
    throw ConfigError("identify_winch: mass, gravity and radius must be positive");
  }
  WinchModel out;
  out.radius = radius;
  out.coulomb_current = i0;
  out.torque_constants.resize(m);
  out.load_friction.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(i_up(i) >= i_down(i))) {
      std::ostringstream msg;
      msg << "identify_winch: wire " << i << " needs i_up >= i_down";
      throw ConfigError(msg.str());
    }
    // Friction acts against the motion in both directions, so the
    // gravity-balance current sits midway between the two thresholds.
    const double i_mg = 0.5 * (i_up(i) + i_down(i));
    const double il = 0.5 * (i_up(i) - i_down(i)) - i0(i);
    if (il < 0.0) {
      std::ostringstream msg;
      msg << "identify_winch: wire " << i << " gives i_L = " << il
          << " A (threshold gap smaller than 2 i0)";
      throw NegativeFriction(msg.str());
    }
    if (!(i_mg > 0.0)) {
      throw ConfigError("identify_winch: gravity-balance current must be positive");
    }
    out.load_friction(i) = il;
    out.torque_constants(i) = radius * mass * g_norm / i_mg;
  }
  return out;
}

}  // namespace cablebot
