#include "cablebot/sim_world.hpp"

#include "cablebot/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cablebot {

Vec3 TerrainPatch::closest_point(const Vec3& p) const {
  const Vec3 d = p - origin;
  const double a = std::clamp(d.dot(edge_u) / edge_u.squaredNorm(), 0.0, 1.0);
  const double b = std::clamp(d.dot(edge_v) / edge_v.squaredNorm(), 0.0, 1.0);
  return origin + a * edge_u + b * edge_v;
}

void WorldModel::validate() const {
  if (!(linear_drag >= 0.0) || !(angular_drag >= 0.0)) {
    throw ConfigError("drag coefficients must be non-negative");
  }
  for (std::size_t i = 0; i < terrain.size(); ++i) {
    const auto& t = terrain[i];
    const double nu = t.edge_u.norm();
    const double nv = t.edge_v.norm();
    if (!(nu > 1e-9) || !(nv > 1e-9) || std::abs(t.edge_u.dot(t.edge_v)) > 1e-9 * nu * nv) {
      std::ostringstream msg;
      msg << "terrain patch " << i << " must have non-degenerate orthogonal edges";
      throw ConfigError(msg.str());
    }
    if (!(t.friction >= 0.0)) {
      throw ConfigError("terrain friction must be non-negative");
    }
  }
  for (const auto& p : payloads) {
    if (!(p.mass > 0.0) || !(p.radius > 0.0)) {
      throw ConfigError("payload mass and radius must be positive");
    }
  }
}

TerrainPatch flat_ground(double half_size, double z, double friction) {
  TerrainPatch t;
  t.origin = Vec3(-half_size, -half_size, z);
  t.edge_u = Vec3(2.0 * half_size, 0.0, 0.0);
  t.edge_v = Vec3(0.0, 2.0 * half_size, 0.0);
  t.friction = friction;
  return t;
}

void RobotParams::validate() const {
  if (!(mass > 0.0) || !(leg_mass >= 0.0) || !(body_half_extent > 0.0)) {
    throw ConfigError("robot: mass and body size must be positive");
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(0.5 * (inertia + inertia.transpose()));
  if ((inertia - inertia.transpose()).norm() > 1e-12 || !(eig.eigenvalues().minCoeff() > 0.0)) {
    throw ConfigError("robot: inertia must be symmetric positive definite");
  }
  if (winch.size() != kAnchorWires || limits.size() != kAnchorWires) {
    throw ConfigError("robot: winch model and tension limits need one entry per anchor wire");
  }
  winch.validate();
  limits.validate();
  legs.validate();
  if (!(cable.stiffness > 0.0) || !(cable.damping >= 0.0) || !(cable.winch_mass > 0.0) ||
      !(cable.max_length > 0.0)) {
    throw ConfigError("robot: cable parameters out of range");
  }
  if (!(contact.stiffness > 0.0) || !(contact.damping >= 0.0) || !(contact.slip_damping >= 0.0)) {
    throw ConfigError("robot: contact parameters out of range");
  }
  if (!(tool.mass >= 0.0) || !(divergence_speed > 0.0)) {
    throw ConfigError("robot: tool mass or divergence speed out of range");
  }
}

double ContactReport::wheel_total() const {
  double s = 0.0;
  for (double f : normal_force) s += f;
  return s;
}

bool ContactReport::any_above(double threshold) const {
  return std::any_of(normal_force.begin(), normal_force.end(),
                     [threshold](double f) { return f > threshold; });
}

int SimState::attached_count() const {
  return static_cast<int>(std::count_if(wires.begin(), wires.end(),
                                        [](const WireState& w) { return w.attached; }));
}

std::vector<int> SimState::attached_indices() const {
  std::vector<int> out;
  for (int i = 0; i < kAnchorWires; ++i) {
    if (wires[static_cast<std::size_t>(i)].attached) out.push_back(i);
  }
  return out;
}

std::vector<WireGeometry> SimState::attached_geometry(const RobotParams& params) const {
  std::vector<WireGeometry> out;
  for (int i : attached_indices()) {
    const auto k = static_cast<std::size_t>(i);
    out.push_back({params.wire_origins[k], wires[k].anchor});
  }
  return out;
}

namespace {

struct PointMass {
  double mass;
  Vec3 offset;  // world-frame offset from the body origin
};

std::vector<PointMass> attached_masses(const SimState& s, const RobotParams& params) {
  std::vector<PointMass> out;
  if (s.tool_attached && params.tool.mass > 0.0) {
    out.push_back({params.tool.mass, s.body.orientation * params.tool.offset});
  }
  for (const auto& p : s.payloads) {
    if (p.grasped) out.push_back({p.spec.mass, s.body.orientation * p.body_offset});
  }
  return out;
}

Mat3 point_inertia(double m, const Vec3& r) {
  return m * (r.squaredNorm() * Mat3::Identity() - r * r.transpose());
}

struct ContactForces {
  ContactReport report;
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();
  std::vector<Vec3> payload_force;  // per payload
  std::vector<std::array<double, 2>> payload_wheel_force;
};

// Penalty normal force for a sphere (center c, radius rad, velocity v)
// against one patch. Returns false when separated.
bool sphere_patch(const TerrainPatch& patch, const Vec3& c, double rad, const Vec3& v,
                  const ContactParams& cp, Vec3& normal, double& fn) {
  const Vec3 pn = patch.normal();
  if ((c - patch.origin).dot(pn) < 0.0) {
    return false;
  }
  const Vec3 q = patch.closest_point(c);
  const Vec3 d = c - q;
  const double dist = d.norm();
  if (dist >= rad) {
    return false;
  }
  normal = dist > 1e-12 ? Vec3(d / dist) : pn;
  const double depth = rad - dist;
  const double depth_rate = -v.dot(normal);
  fn = std::max(0.0, cp.stiffness * depth + cp.damping * depth_rate);
  return true;
}

Vec3 regularized_friction(const Vec3& slip, const Vec3& normal, double slope, double limit) {
  const Vec3 tangential = slip - slip.dot(normal) * normal;
  Vec3 f = -slope * tangential;
  const double mag = f.norm();
  if (mag > limit && mag > 0.0) {
    f *= limit / mag;
  }
  return f;
}

ContactForces compute_contacts(const SimState& s, const WorldModel& world,
                               const RobotParams& params) {
  ContactForces out;
  out.payload_force.assign(s.payloads.size(), Vec3::Zero());
  out.payload_wheel_force.assign(s.payloads.size(), {0.0, 0.0});
  const auto& cp = params.contact;
  const auto& body = s.body;
  const auto centers = contact_centers(s, params);

  for (int k = 0; k < kContactCount; ++k) {
    const bool wheel = k == kLeftWheel || k == kRightWheel;
    const Side side = (k == kLeftWheel || k == kLeftKnee) ? Side::Left : Side::Right;
    const double rad = wheel ? params.legs.wheel_radius : params.legs.support_wheel_radius;
    const Vec3& c = centers[static_cast<std::size_t>(k)];
    const Vec3 r = c - body.position;
    const Vec3 v = body.linear_velocity + body.angular_velocity.cross(r);
    const Vec3 axis = body.orientation * wheel_axis(params.legs, side, s.legs.leg(side));
    const double spin = wheel ? s.legs.wheel_speed[static_cast<std::size_t>(side)] : 0.0;

    double best = 0.0;
    for (std::size_t pi = 0; pi < world.terrain.size(); ++pi) {
      const auto& patch = world.terrain[pi];
      Vec3 n;
      double fn = 0.0;
      if (!sphere_patch(patch, c, rad, v, cp, n, fn)) continue;
      Vec3 f = fn * n;
      if (wheel) {
        // Material velocity of the tread at the contact relative to ground.
        const Vec3 slip = v - spin * rad * axis.cross(n);
        f += regularized_friction(slip, n, cp.slip_damping, patch.friction * fn);
      }
      out.force += f;
      out.torque += (r - rad * n).cross(f);
      out.report.normal_force[static_cast<std::size_t>(k)] += fn;
      if (fn > best) {
        best = fn;
        out.report.patch[static_cast<std::size_t>(k)] = static_cast<int>(pi);
      }
    }

    if (!wheel) continue;
    for (std::size_t j = 0; j < s.payloads.size(); ++j) {
      const auto& p = s.payloads[j];
      if (p.grasped) continue;
      const Vec3 d = c - p.position;
      const double dist = d.norm();
      const double depth = rad + p.spec.radius - dist;
      if (depth <= 0.0 || dist < 1e-12) continue;
      const Vec3 n = d / dist;  // payload -> wheel
      const Vec3 rel = v - p.velocity;
      const double fn = std::max(0.0, cp.stiffness * depth - cp.damping * rel.dot(n));
      Vec3 f = fn * n;  // on the body
      const Vec3 tread = v - spin * rad * axis.cross(n);
      f += regularized_friction(tread - p.velocity, n, 0.1 * cp.slip_damping, fn);
      out.force += f;
      out.torque += (r - rad * n).cross(f);
      out.payload_force[j] -= f;
      out.payload_wheel_force[j][static_cast<std::size_t>(side)] += fn;
    }
  }

  if (cp.body_corners) {
    const double h = params.body_half_extent;
    for (int corner = 0; corner < 8; ++corner) {
      const Vec3 local((corner & 1) ? h : -h, (corner & 2) ? h : -h, (corner & 4) ? h : -h);
      const Vec3 r = body.orientation * local;
      const Vec3 c = body.position + r;
      const Vec3 v = body.linear_velocity + body.angular_velocity.cross(r);
      for (const auto& patch : world.terrain) {
        Vec3 n;
        double fn = 0.0;
        if (!sphere_patch(patch, c, 1e-3, v, cp, n, fn)) continue;
        const Vec3 f = fn * n + regularized_friction(v, n, cp.body_slip_damping, patch.friction * fn);
        out.force += f;
        out.torque += r.cross(f);
        out.report.body_force += fn;
      }
    }
  }
  return out;
}

}  // namespace

std::array<Vec3, kContactCount> contact_centers(const SimState& s, const RobotParams& params) {
  const auto& b = s.body;
  const auto& lp = params.legs;
  return {b.to_world(wheel_center(lp, Side::Left, s.legs.leg(Side::Left))),
          b.to_world(wheel_center(lp, Side::Right, s.legs.leg(Side::Right))),
          b.to_world(knee_position(lp, Side::Left, s.legs.leg(Side::Left))),
          b.to_world(knee_position(lp, Side::Right, s.legs.leg(Side::Right)))};
}

double moving_mass(const SimState& s, const RobotParams& params) {
  double m = params.total_mass();
  for (const auto& pm : attached_masses(s, params)) m += pm.mass;
  return m;
}

Mat3 world_inertia(const SimState& s, const RobotParams& params) {
  const Mat3 rot = s.body.orientation.toRotationMatrix();
  Mat3 inertia = rot * params.inertia * rot.transpose();
  for (const auto& pm : attached_masses(s, params)) {
    inertia += point_inertia(pm.mass, pm.offset);
  }
  return inertia;
}

SimState make_state(const BodyState& body, const LegJointState& legs, const WorldModel& world,
                    const RobotParams& params) {
  SimState s;
  s.body = body;
  s.body.orientation.normalize();
  s.legs = legs;
  for (const auto& spec : world.payloads) {
    PayloadState p;
    p.spec = spec;
    p.position = spec.position;
    s.payloads.push_back(p);
  }
  s.angular_momentum = world_inertia(s, params) * s.body.angular_velocity;
  return s;
}

SimState attach_wire(const SimState& state, int wire, const Vec3& anchor, const RobotParams& params) {
  if (wire < 0 || wire >= kAnchorWires) {
    throw ConfigError("attach_wire: wire index out of range");
  }
  const auto k = static_cast<std::size_t>(wire);
  if (state.wires[k].attached) {
    throw AlreadyAttached("wire " + std::to_string(wire + 1) + " is already attached");
  }
  const WireVectors v = wire_vectors(state.body, {params.wire_origins[k], anchor});
  SimState next = state;
  WireState& w = next.wires[k];
  w.attached = true;
  w.anchor = anchor;
  w.length = v.length;
  w.rate = 0.0;
  w.tension = 0.0;
  w.current = 0.0;
  return next;
}

SimState detach_wire(const SimState& state, int wire) {
  if (wire < 0 || wire >= kAnchorWires) {
    throw ConfigError("detach_wire: wire index out of range");
  }
  const auto k = static_cast<std::size_t>(wire);
  if (!state.wires[k].attached) {
    throw NotAttached("wire " + std::to_string(wire + 1) + " is not attached");
  }
  SimState next = state;
  next.wires[k] = WireState{};
  return next;
}

SimState pretension_wires(const SimState& state, const VecX& tensions, const RobotParams& params) {
  const auto idx = state.attached_indices();
  if (static_cast<Eigen::Index>(idx.size()) != tensions.size()) {
    throw ConfigError("pretension_wires: one tension per attached wire required");
  }
  SimState next = state;
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const auto k = static_cast<std::size_t>(idx[j]);
    WireState& w = next.wires[k];
    const double f = std::max(0.0, tensions(static_cast<Eigen::Index>(j)));
    const double l = wire_vectors(state.body, {params.wire_origins[k], w.anchor}).length;
    w.length = l - f / params.cable.stiffness;
    w.tension = f;
    w.rate = 0.0;
  }
  return next;
}

WireKinematics wire_kinematics(const SimState& s, const RobotParams& params) {
  WireKinematics out;
  out.indices = s.attached_indices();
  const auto geom = s.attached_geometry(params);
  const auto m = static_cast<Eigen::Index>(geom.size());
  out.lengths.resize(m);
  out.rates.resize(m);
  if (m == 0) return out;
  const WireJacobian jac = build_jacobian(s.body, geom);
  out.lengths = jac.lengths;
  out.rates = wire_rates(s.body, jac);
  return out;
}

ContactReport contact_flags(const SimState& state, const WorldModel& world,
                            const RobotParams& params) {
  return compute_contacts(state, world, params).report;
}

SimState step(const SimState& state, const ActuatorCommand& cmd, const WorldModel& world,
              const RobotParams& params, double dt) {
  if (!(dt > 0.0) || dt > 0.01) {
    throw ConfigError("step: dt must be in (0, 0.01]");
  }
  SimState next = state;
  const BodyState& body = state.body;
  const double mass = moving_mass(state, params);

  Vec3 force = mass * world.gravity;
  Vec3 torque = Vec3::Zero();
  for (const auto& pm : attached_masses(state, params)) {
    torque += pm.offset.cross(pm.mass * world.gravity);
  }
  force -= world.linear_drag * body.linear_velocity;
  torque -= world.angular_drag * body.angular_velocity;

  // Cables: unilateral spring-dampers between paid-out and geometric length.
  WireVec tension = WireVec::Zero();
  for (int i = 0; i < kAnchorWires; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const WireState& w = state.wires[k];
    if (!w.attached) continue;
    const WireVectors wv = wire_vectors(body, {params.wire_origins[k], w.anchor});
    const Vec3 v_attach = body.linear_velocity + body.angular_velocity.cross(wv.r);
    const double geo_rate = -wv.s.dot(v_attach);
    const double stretch = wv.length - w.length;
    double f = 0.0;
    if (stretch > 0.0) {
      f = std::max(0.0, params.cable.stiffness * stretch + params.cable.damping * (geo_rate - w.rate));
    }
    tension(i) = f;
    force += f * wv.s;
    torque += wv.r.cross(f * wv.s);
  }

  const ContactForces contacts = compute_contacts(state, world, params);
  force += contacts.force;
  torque += contacts.torque;
  next.contacts = contacts.report;

  // Winches: motor pull against cable tension, friction opposing drum motion
  // and holding it still while the net drive stays inside the friction band.
  const double weight = params.total_mass() * world.gravity.norm();
  const double load = weight > 0.0 ? tension.norm() / weight : 0.0;
  for (int i = 0; i < kAnchorWires; ++i) {
    const auto k = static_cast<std::size_t>(i);
    WireState& w = next.wires[k];
    if (!w.attached) continue;
    const double gain = params.winch.torque_constants(i) / params.winch.radius;
    const double motor = gain * cmd.currents(i);
    const double friction =
        gain * (params.winch.coulomb_current(i) + params.winch.load_friction(i) * load);
    const double trial = w.rate + dt * (tension(i) - motor) / params.cable.winch_mass;
    const double band = dt * friction / params.cable.winch_mass;
    double rate = 0.0;
    if (std::abs(trial) > band) {
      rate = trial - std::copysign(band, trial);
    }
    double length = w.length + rate * dt;
    if (length < 0.0 || length > params.cable.max_length) {
      length = std::clamp(length, 0.0, params.cable.max_length);
      rate = 0.0;
    }
    w.length = length;
    w.rate = rate;
    w.tension = tension(i);
    w.current = cmd.currents(i);
  }

  // Body: velocity first, then position with the new velocity. Angular
  // momentum is the integrated quantity so torque-free motion conserves it.
  next.body.linear_velocity = body.linear_velocity + dt * force / mass;
  next.angular_momentum = state.angular_momentum + dt * torque;
  const Vec3 omega = world_inertia(state, params).ldlt().solve(next.angular_momentum);
  next.body.orientation = integrate_orientation(body.orientation, omega, dt);
  next.body.position = body.position + dt * next.body.linear_velocity;
  next.body.angular_velocity = world_inertia(next, params).ldlt().solve(next.angular_momentum);

  // Legs follow their targets at the configured rates.
  const auto& lp = params.legs;
  const JointVector q = state.legs.joints();
  const JointVector target = lp.clamp(cmd.joints);
  const double max_step = lp.joint_rate_limit * dt;
  next.legs.set_joints(q + (target - q).cwiseMax(-max_step).cwiseMin(max_step));
  for (std::size_t side = 0; side < 2; ++side) {
    const double want = std::clamp(cmd.wheel_speeds[side], -lp.wheel_speed_limit, lp.wheel_speed_limit);
    const double cur = state.legs.wheel_speed[side];
    const double dmax = lp.wheel_accel_limit * dt;
    next.legs.wheel_speed[side] = cur + std::clamp(want - cur, -dmax, dmax);
  }

  // Payloads: free ones fall and rest on terrain; grasped ones ride along.
  for (std::size_t j = 0; j < next.payloads.size(); ++j) {
    PayloadState& p = next.payloads[j];
    p.wheel_force = contacts.payload_wheel_force[j];
    if (p.grasped) {
      const Vec3 r = next.body.orientation * p.body_offset;
      p.position = next.body.position + r;
      p.velocity = next.body.linear_velocity + next.body.angular_velocity.cross(r);
      continue;
    }
    Vec3 f = p.spec.mass * world.gravity + contacts.payload_force[j];
    for (const auto& patch : world.terrain) {
      Vec3 n;
      double fn = 0.0;
      if (!sphere_patch(patch, p.position, p.spec.radius, p.velocity, params.contact, n, fn)) continue;
      f += fn * n + regularized_friction(p.velocity, n, 0.1 * params.contact.slip_damping,
                                         patch.friction * fn);
    }
    p.velocity += dt * f / p.spec.mass;
    p.position += dt * p.velocity;

    const bool pinched = p.wheel_force[0] > params.contact.grasp_threshold &&
                         p.wheel_force[1] > params.contact.grasp_threshold;
    const bool lifting_spin = next.legs.wheel_speed[0] > 0.0 && next.legs.wheel_speed[1] > 0.0;
    if (pinched && lifting_spin) {
      const double m_body = moving_mass(next, params);
      next.body.linear_velocity =
          (m_body * next.body.linear_velocity + p.spec.mass * p.velocity) / (m_body + p.spec.mass);
      p.grasped = true;
      p.body_offset = next.body.orientation.conjugate() * (p.position - next.body.position);
      p.velocity = next.body.linear_velocity;
      next.body.angular_velocity = world_inertia(next, params).ldlt().solve(next.angular_momentum);
    }
  }

  next.time = state.time + dt;
  const double speed = next.body.twist().norm();
  if (!std::isfinite(speed) || speed > params.divergence_speed) {
    std::ostringstream msg;
    msg << "body twist norm " << speed << " exceeds " << params.divergence_speed << " at t="
        << next.time << " s";
    throw NumericalDivergence(msg.str());
  }
  return next;
}

double mechanical_energy(const SimState& s, const WorldModel& world, const RobotParams& params) {
  const double mass = moving_mass(s, params);
  double e = 0.5 * mass * s.body.linear_velocity.squaredNorm() +
             0.5 * s.body.angular_velocity.dot(s.angular_momentum) -
             params.total_mass() * world.gravity.dot(s.body.position);
  for (const auto& pm : attached_masses(s, params)) {
    e -= pm.mass * world.gravity.dot(s.body.position + pm.offset);
  }
  for (int i = 0; i < kAnchorWires; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const WireState& w = s.wires[k];
    if (!w.attached) continue;
    const double l = wire_vectors(s.body, {params.wire_origins[k], w.anchor}).length;
    const double stretch = std::max(0.0, l - w.length);
    e += 0.5 * params.cable.stiffness * stretch * stretch;
    e += 0.5 * params.cable.winch_mass * w.rate * w.rate;
  }
  return e;
}

}  // namespace cablebot
