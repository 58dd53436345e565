#pragma once

#include "cablebot/geometry.hpp"

#include <array>
#include <string_view>

namespace cablebot {

enum class LegMode { WheelDriving, Manipulation, ToolUtilization };

std::string_view to_string(LegMode mode);
LegMode leg_mode_from_string(std::string_view name);

enum class Side { Left = 0, Right = 1 };

/// +1 for the left leg, -1 for the right leg.
constexpr double side_sign(Side side) { return side == Side::Left ? 1.0 : -1.0; }

/// Joint order for both legs: [L roll, L pitch, L knee, R roll, R pitch, R knee].
using JointVector = Eigen::Matrix<double, 6, 1>;

/// Angles of one Roll-Pitch-Pitch leg. Roll is mirrored so that positive
/// roll abducts either leg outward.
struct LegAngles {
  double hip_roll = 0.0;
  double hip_pitch = 0.0;
  double knee_pitch = 0.0;
};

struct LegJointState {
  std::array<LegAngles, 2> legs{};
  std::array<double, 2> wheel_speed{0.0, 0.0};  ///< rad/s, positive rolls forward

  const LegAngles& leg(Side side) const { return legs[static_cast<std::size_t>(side)]; }
  LegAngles& leg(Side side) { return legs[static_cast<std::size_t>(side)]; }

  JointVector joints() const;
  void set_joints(const JointVector& q);
};

struct JointLimits {
  JointVector lower;
  JointVector upper;
};

struct LegParams {
  double thigh_length = 0.23;
  double calf_length = 0.23;
  double wheel_radius = 0.05;
  double support_wheel_radius = 0.03;  ///< omni wheel at the knee
  double hip_lateral = 0.12;           ///< body center to hip roll axis along y
  double hip_forward = 0.0;
  double hip_height = 0.0;
  double joint_rate_limit = 3.0;   ///< rad/s
  double wheel_speed_limit = 40.0; ///< rad/s
  double wheel_accel_limit = 200.0;  ///< rad/s^2
  JointLimits limits = default_limits();

  static JointLimits default_limits();
  void validate() const;
  Vec3 hip_position(Side side) const;
  JointVector clamp(const JointVector& q) const;
  bool within_limits(const JointVector& q, double tol = 1e-12) const;
};

/// Wheel center of one leg in the body frame.
Vec3 wheel_center(const LegParams& params, Side side, const LegAngles& angles);
/// Knee (support omni wheel) center in the body frame.
Vec3 knee_position(const LegParams& params, Side side, const LegAngles& angles);
/// Wheel spin axis in the body frame; positive spin about it rolls forward.
Vec3 wheel_axis(const LegParams& params, Side side, const LegAngles& angles);

struct TrackWidth {
  double left = 0.0;
  double right = 0.0;
};

/// Lateral distance from the body center to each wheel.
TrackWidth track_width(const LegJointState& state, const LegParams& params);

struct WheelSpeeds {
  double left = 0.0;
  double right = 0.0;
};

/// Differential drive: w_L = (v - yaw h_L)/R, w_R = (v + yaw h_R)/R.
WheelSpeeds drive_wheel_speeds(double forward_velocity, double yaw_rate,
                               const LegParams& params, const LegJointState& state);

/// Pitch-pitch angles of one arm.
struct ArmAngles {
  double hip_pitch = 0.0;
  double knee_pitch = 0.0;
};

/// Grasp target in the body frame: midpoint between the wheels and the
/// object width. Only x and y are used; both tips move in the hip plane.
struct ManipTarget {
  Vec3 p_target = Vec3::Zero();
  double width = 0.0;
  double wheel_spin = 2.0;  ///< rad/s inward spin used to lift a grasped object
};

struct ManipSolution {
  std::array<ArmAngles, 2> arms{};
  std::array<Eigen::Vector2d, 2> p_arm{};
};

/// Two-link planar forward kinematics in the arm plane.
Eigen::Vector2d arm_fk(const ArmAngles& angles, const LegParams& params);

/// Analytic two-link IK, elbow-down branch (knee in [0, pi]).
/// Throws Unreachable carrying `leg` when |p_arm| is outside the annulus.
ArmAngles arm_ik(const Eigen::Vector2d& p_arm, const LegParams& params, int leg = 0);

/// Arm-plane tip target of one leg: the grasp contact point shifted by d/2
/// to that leg's side, then pulled toward the hip by the wheel radius.
Eigen::Vector2d arm_target(const ManipTarget& target, const LegParams& params, Side side);

ManipSolution manip_ik(const ManipTarget& target, const LegParams& params);

/// Full joint vector for a manipulation solution (roll fixed at pi/2 so both
/// pitch planes coincide with the body x-y plane through the hips).
JointVector manipulation_joints(const ManipSolution& sol);

enum class ToolPhase { Open, Closed };

std::string_view to_string(ToolPhase phase);
ToolPhase tool_phase_from_string(std::string_view name);

struct ToolPosePair {
  JointVector open_pose = JointVector::Zero();
  JointVector closed_pose = JointVector::Zero();
  double transition_time = 1.0;
};

/// Joint target `t` seconds after switching to `phase`: linear from the other
/// recorded pose to the phase pose, saturating at transition_time.
JointVector tool_phase_targets(const ToolPosePair& pair, ToolPhase phase, double t);

/// Driving posture: wheels and knee omni wheels both on a flat floor.
JointVector vehicle_posture(const LegParams& params);
/// Both arms reaching the default grasp target below the hanging body.
JointVector arm_ready_posture(const LegParams& params);
ToolPosePair default_tool_poses(const LegParams& params);

}  // namespace cablebot
