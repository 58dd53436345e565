#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <span>
#include <vector>

namespace cablebot {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;
using VecX = Eigen::VectorXd;
using Mat6X = Eigen::Matrix<double, 6, Eigen::Dynamic>;

/// Wires shorter than this are treated as degenerate.
inline constexpr double kMinWireLength = 1e-6;

/// 6-DOF state of the main body. Position is the CoG, which coincides with
/// the body-frame origin at the cube center. Velocities are world frame.
struct BodyState {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();

  /// [linear; angular]
  Vec6 twist() const;
  void set_twist(const Vec6& twist);

  /// Body-frame point expressed in the world frame.
  Vec3 to_world(const Vec3& body_point) const { return position + orientation * body_point; }
};

/// Wire routed from a body-frame origin vertex to a world-frame anchor.
struct WireGeometry {
  Vec3 body_attach = Vec3::Zero();
  Vec3 anchor = Vec3::Zero();
};

/// r: CoG to wire origin (world). s: unit vector from origin toward anchor.
struct WireVectors {
  Vec3 r;
  Vec3 s;
  double length = 0.0;
};

/// Pose snapshot used to detect Jacobians or tension solutions that were
/// computed at a different pose than the one being controlled.
struct Pose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();

  static Pose of(const BodyState& body) { return {body.position, body.orientation}; }
  /// Max of the position distance and the quaternion distance (sign-invariant).
  double distance_to(const Pose& other) const;
};

/// 6 x m map from wire tensions to body wrench, columns [s_i; r_i x s_i].
struct WireJacobian {
  Mat6X matrix;
  VecX lengths;
  Pose pose;

  Eigen::Index wire_count() const { return matrix.cols(); }
};

WireVectors wire_vectors(const BodyState& body, const WireGeometry& geom);

WireJacobian build_jacobian(const BodyState& body, std::span<const WireGeometry> wires);

/// Wire length rates for the body twist: l_dot = -W^T q_dot. A wire shortens
/// when the body moves toward its anchor.
VecX wire_rates(const BodyState& body, const WireJacobian& jac);

/// Geometric wire lengths at the given pose.
VecX wire_lengths(const BodyState& body, std::span<const WireGeometry> wires);

/// Rotation by the rotation vector `omega * dt` applied on the world side:
/// q' = exp(omega dt) q. Result is normalized.
Quat integrate_orientation(const Quat& q, const Vec3& omega, double dt);

}  // namespace cablebot
