#include "cablebot/geometry.hpp"

#include "cablebot/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cablebot {

Vec6 BodyState::twist() const {
  Vec6 t;
  t << linear_velocity, angular_velocity;
  return t;
}

void BodyState::set_twist(const Vec6& twist) {
  linear_velocity = twist.head<3>();
  angular_velocity = twist.tail<3>();
}

double Pose::distance_to(const Pose& other) const {
  const double dp = (position - other.position).norm();
  const double dq = std::min((orientation.coeffs() - other.orientation.coeffs()).norm(),
                             (orientation.coeffs() + other.orientation.coeffs()).norm());
  return std::max(dp, dq);
}

WireVectors wire_vectors(const BodyState& body, const WireGeometry& geom) {
  WireVectors out;
  out.r = body.orientation * geom.body_attach;
  const Vec3 delta = geom.anchor - (body.position + out.r);
  out.length = delta.norm();
  if (!(out.length > kMinWireLength)) {
    std::ostringstream msg;
    msg << "wire origin and anchor coincide (length " << out.length << " m)";
    throw DegenerateWire(msg.str());
  }
  out.s = delta / out.length;
  return out;
}

WireJacobian build_jacobian(const BodyState& body, std::span<const WireGeometry> wires) {
  WireJacobian jac;
  const auto m = static_cast<Eigen::Index>(wires.size());
  jac.matrix.resize(6, m);
  jac.lengths.resize(m);
  jac.pose = Pose::of(body);
  for (Eigen::Index i = 0; i < m; ++i) {
    const WireVectors v = wire_vectors(body, wires[static_cast<std::size_t>(i)]);
    jac.matrix.col(i).head<3>() = v.s;
    jac.matrix.col(i).tail<3>() = v.r.cross(v.s);
    jac.lengths(i) = v.length;
  }
  return jac;
}

VecX wire_rates(const BodyState& body, const WireJacobian& jac) {
  return -(jac.matrix.transpose() * body.twist());
}

VecX wire_lengths(const BodyState& body, std::span<const WireGeometry> wires) {
  VecX out(static_cast<Eigen::Index>(wires.size()));
  for (std::size_t i = 0; i < wires.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = wire_vectors(body, wires[i]).length;
  }
  return out;
}

Quat integrate_orientation(const Quat& q, const Vec3& omega, double dt) {
  const double angle = omega.norm() * dt;
  Quat dq = Quat::Identity();
  if (angle > 0.0) {
    dq = Quat(Eigen::AngleAxisd(angle, omega.normalized()));
  }
  Quat out = dq * q;
  out.normalize();
  return out;
}

}  // namespace cablebot
