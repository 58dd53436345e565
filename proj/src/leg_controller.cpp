#include "cablebot/leg_controller.hpp"

#include "cablebot/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace cablebot {

std::string_view to_string(LegMode mode) {
  switch (mode) {
    case LegMode::WheelDriving:
      return "WheelDriving";
    case LegMode::Manipulation:
      return "Manipulation";
    case LegMode::ToolUtilization:
      return "ToolUtilization";
  }
  return "WheelDriving";
}

LegMode leg_mode_from_string(std::string_view name) {
  if (name == "WheelDriving") return LegMode::WheelDriving;
  if (name == "Manipulation") return LegMode::Manipulation;
  if (name == "ToolUtilization") return LegMode::ToolUtilization;
  throw ConfigError("unknown leg mode '" + std::string(name) + "'");
}

std::string_view to_string(ToolPhase phase) { return phase == ToolPhase::Open ? "Open" : "Closed"; }

ToolPhase tool_phase_from_string(std::string_view name) {
  if (name == "Open") return ToolPhase::Open;
  if (name == "Closed") return ToolPhase::Closed;
  throw ConfigError("unknown tool phase '" + std::string(name) + "'");
}

JointVector LegJointState::joints() const {
  JointVector q;
  q << legs[0].hip_roll, legs[0].hip_pitch, legs[0].knee_pitch, legs[1].hip_roll,
      legs[1].hip_pitch, legs[1].knee_pitch;
  return q;
}

void LegJointState::set_joints(const JointVector& q) {
  legs[0] = {q(0), q(1), q(2)};
  legs[1] = {q(3), q(4), q(5)};
}

JointLimits LegParams::default_limits() {
  constexpr double pi = std::numbers::pi;
  JointLimits lim;
  lim.lower << -0.6, -pi, -pi, -0.6, -pi, -pi;
  lim.upper << 1.8, pi, pi, 1.8, pi, pi;
  return lim;
}

void LegParams::validate() const {
  if (!(thigh_length > 0.0) || !(calf_length > 0.0) || !(wheel_radius > 0.0) ||
      !(support_wheel_radius > 0.0) || !(hip_lateral > 0.0)) {
    throw ConfigError("leg parameters: lengths and radii must be positive");
  }
  if (!(joint_rate_limit > 0.0) || !(wheel_speed_limit > 0.0) || !(wheel_accel_limit > 0.0)) {
    throw ConfigError("leg parameters: rate limits must be positive");
  }
  if ((limits.lower.array() > limits.upper.array()).any()) {
    throw ConfigError("leg parameters: joint lower limit above upper limit");
  }
}

Vec3 LegParams::hip_position(Side side) const {
  return {hip_forward, side_sign(side) * hip_lateral, hip_height};
}

JointVector LegParams::clamp(const JointVector& q) const {
  return q.cwiseMax(limits.lower).cwiseMin(limits.upper);
}

bool LegParams::within_limits(const JointVector& q, double tol) const {
  return ((q - limits.lower).array() >= -tol).all() && ((limits.upper - q).array() >= -tol).all();
}

namespace {

// Roll about body x applied to a vector in the leg's pitch plane (y = 0).
Vec3 roll_apply(double sign_roll, double u, double w) {
  return {u, -w * std::sin(sign_roll), w * std::cos(sign_roll)};
}

}  // namespace

Vec3 wheel_center(const LegParams& params, Side side, const LegAngles& a) {
  const double sum = a.hip_pitch + a.knee_pitch;
  const double u = -params.thigh_length * std::sin(a.hip_pitch) - params.calf_length * std::sin(sum);
  const double w = -params.thigh_length * std::cos(a.hip_pitch) - params.calf_length * std::cos(sum);
  return params.hip_position(side) + roll_apply(side_sign(side) * a.hip_roll, u, w);
}

Vec3 knee_position(const LegParams& params, Side side, const LegAngles& a) {
  const double u = -params.thigh_length * std::sin(a.hip_pitch);
  const double w = -params.thigh_length * std::cos(a.hip_pitch);
  return params.hip_position(side) + roll_apply(side_sign(side) * a.hip_roll, u, w);
}

Vec3 wheel_axis(const LegParams& /*params*/, Side side, const LegAngles& a) {
  const double phi = side_sign(side) * a.hip_roll;
  return {0.0, std::cos(phi), std::sin(phi)};
}

TrackWidth track_width(const LegJointState& state, const LegParams& params) {
  return {std::abs(wheel_center(params, Side::Left, state.leg(Side::Left)).y()),
          std::abs(wheel_center(params, Side::Right, state.leg(Side::Right)).y())};
}

WheelSpeeds drive_wheel_speeds(double forward_velocity, double yaw_rate, const LegParams& params,
                               const LegJointState& state) {
  const TrackWidth h = track_width(state, params);
  return {(forward_velocity - yaw_rate * h.left) / params.wheel_radius,
          (forward_velocity + yaw_rate * h.right) / params.wheel_radius};
}

Eigen::Vector2d arm_fk(const ArmAngles& a, const LegParams& params) {
  const double sum = a.hip_pitch + a.knee_pitch;
  return {params.thigh_length * std::cos(a.hip_pitch) + params.calf_length * std::cos(sum),
          params.thigh_length * std::sin(a.hip_pitch) + params.calf_length * std::sin(sum)};
}

ArmAngles arm_ik(const Eigen::Vector2d& p_arm, const LegParams& params, int leg) {
  const double lt = params.thigh_length;
  const double lc = params.calf_length;
  const double reach = p_arm.norm();
  constexpr double kEdge = 1e-12;
  if (!(reach > kEdge) || reach < std::abs(lt - lc) - kEdge || reach > lt + lc + kEdge) {
    std::ostringstream msg;
    msg << (leg == 0 ? "left" : "right") << " arm target at distance " << reach
        << " m is outside [" << std::abs(lt - lc) << ", " << lt + lc << "]";
    throw Unreachable(msg.str(), leg);
  }
  const double c = std::clamp((reach * reach - lt * lt - lc * lc) / (2.0 * lt * lc), -1.0, 1.0);
  ArmAngles out;
  out.knee_pitch = std::acos(c);
  out.hip_pitch = std::atan2(p_arm.y(), p_arm.x()) -
                  std::atan2(lc * std::sin(out.knee_pitch), lt + lc * std::cos(out.knee_pitch));
  return out;
}

Eigen::Vector2d arm_target(const ManipTarget& target, const LegParams& params, Side side) {
  const double s = side_sign(side);
  const Vec3 hip = params.hip_position(side);
  const double contact_x = target.p_target.x();
  const double contact_y = target.p_target.y() + s * 0.5 * target.width;
  // Arm plane: x outward along the hip axis, y toward body -x.
  Eigen::Vector2d p(s * (contact_y - hip.y()), -(contact_x - hip.x()));
  const double reach = p.norm();
  if (reach > 0.0) {
    p *= (reach - params.wheel_radius) / reach;
  }
  return p;
}

ManipSolution manip_ik(const ManipTarget& target, const LegParams& params) {
  if (target.width < 0.0) {
    throw ConfigError("manipulation width must be non-negative");
  }
  ManipSolution sol;
  for (Side side : {Side::Left, Side::Right}) {
    const auto k = static_cast<std::size_t>(side);
    sol.p_arm[k] = arm_target(target, params, side);
    sol.arms[k] = arm_ik(sol.p_arm[k], params, static_cast<int>(k));
  }
  return sol;
}

JointVector manipulation_joints(const ManipSolution& sol) {
  constexpr double half_pi = std::numbers::pi / 2.0;
  JointVector q;
  q << half_pi, sol.arms[0].hip_pitch, sol.arms[0].knee_pitch, half_pi, sol.arms[1].hip_pitch,
      sol.arms[1].knee_pitch;
  return q;
}

JointVector tool_phase_targets(const ToolPosePair& pair, ToolPhase phase, double t) {
  const JointVector& from = phase == ToolPhase::Open ? pair.closed_pose : pair.open_pose;
  const JointVector& to = phase == ToolPhase::Open ? pair.open_pose : pair.closed_pose;
  if (!(pair.transition_time > 0.0) || t >= pair.transition_time) {
    return to;
  }
  if (t <= 0.0) {
    return from;
  }
  const double alpha = t / pair.transition_time;
  return from + alpha * (to - from);
}

JointVector vehicle_posture(const LegParams& params) {
  constexpr double pi = std::numbers::pi;
  // Thigh tilted forward, calf lifted so wheel and knee omni wheel touch the
  // same floor: -L_c cos(hip + knee) = R - R_support.
  const double hip = -pi / 3.0;
  const double ratio = (params.wheel_radius - params.support_wheel_radius) / params.calf_length;
  const double calf = std::acos(std::clamp(-ratio, -1.0, 1.0));
  const double knee = calf - hip;
  JointVector q;
  q << 0.0, hip, knee, 0.0, hip, knee;
  return q;
}

JointVector arm_ready_posture(const LegParams& params) {
  ManipTarget target;
  target.p_target = Vec3(params.hip_forward - 0.30, 0.0, params.hip_height);
  target.width = 0.12;
  return manipulation_joints(manip_ik(target, params));
}

ToolPosePair default_tool_poses(const LegParams& params) {
  ManipTarget target;
  target.p_target = Vec3(params.hip_forward - 0.30, 0.0, params.hip_height);
  ToolPosePair pair;
  target.width = 0.20;
  pair.open_pose = manipulation_joints(manip_ik(target, params));
  target.width = 0.05;
  pair.closed_pose = manipulation_joints(manip_ik(target, params));
  pair.transition_time = 1.0;
  return pair;
}

}  // namespace cablebot
