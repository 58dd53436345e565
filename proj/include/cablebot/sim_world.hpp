#pragma once

#include "cablebot/geometry.hpp"
#include "cablebot/leg_controller.hpp"
#include "cablebot/tension_qp.hpp"
#include "cablebot/wire_controller.hpp"

#include <array>
#include <vector>

namespace cablebot {

inline constexpr int kAnchorWires = 4;
using WireVec = Eigen::Matrix<double, kAnchorWires, 1>;

/// Rectangle origin + a*edge_u + b*edge_v, a, b in [0, 1]. Edges must be
/// orthogonal; the contact side is the one edge_u x edge_v points to.
struct TerrainPatch {
  Vec3 origin = Vec3::Zero();
  Vec3 edge_u = Vec3::UnitX();
  Vec3 edge_v = Vec3::UnitY();
  double friction = 1.0;

  Vec3 normal() const { return edge_u.cross(edge_v).normalized(); }
  Vec3 closest_point(const Vec3& p) const;
};

struct PayloadSpec {
  double mass = 0.5;
  Vec3 position = Vec3::Zero();  ///< initial center, world frame
  double radius = 0.05;
};

struct WorldModel {
  Vec3 gravity{0.0, 0.0, -9.81};
  std::vector<Vec3> anchors;
  std::vector<TerrainPatch> terrain;
  std::vector<PayloadSpec> payloads;
  double linear_drag = 0.0;   ///< N s/m on the body, zero by default
  double angular_drag = 0.0;  ///< N m s/rad

  void validate() const;
};

/// Flat floor patch centered at the origin.
TerrainPatch flat_ground(double half_size = 20.0, double z = 0.0, double friction = 1.0);

struct CableParams {
  double stiffness = 1e5;   ///< N/m
  double damping = 1e3;     ///< N s/m
  double winch_mass = 2.0;  ///< drum + gearhead inertia reflected to the wire, kg
  double max_length = 6.0;  ///< m
};

struct ContactParams {
  double stiffness = 2e4;           ///< N/m
  double damping = 300.0;           ///< N s/m
  double slip_damping = 2000.0;     ///< regularized Coulomb slope, N s/m
  double body_slip_damping = 500.0;
  double contact_threshold = 0.5;   ///< N, counts as ground contact for guards
  double grasp_threshold = 1.0;     ///< N per wheel to latch a payload
  bool body_corners = true;         ///< collide the cube corners with terrain
};

struct ToolParams {
  double mass = 1.0;
  Vec3 offset{-0.35, 0.0, 0.0};  ///< tool CoG in the body frame (rear mounted)
};

struct RobotParams {
  double mass = 12.0;                          ///< main body, kg
  Mat3 inertia = Mat3::Identity() * 0.1;       ///< body frame, kg m^2
  double body_half_extent = 0.09;              ///< 180 mm cube
  std::array<Vec3, kAnchorWires> wire_origins{
      Vec3(0.09, 0.09, 0.09), Vec3(0.09, -0.09, 0.09), Vec3(0.09, 0.09, -0.09),
      Vec3(0.09, -0.09, -0.09)};
  Vec3 tool_wire_origin{-0.09, 0.0, 0.0};
  double leg_mass = 0.5;                       ///< lumped per leg, added to the body
  LegParams legs;
  WinchModel winch = WinchModel::uniform(kAnchorWires);
  TensionLimits limits = TensionLimits::uniform(kAnchorWires);
  CableParams cable;
  ContactParams contact;
  ToolParams tool;
  double divergence_speed = 100.0;

  /// Body plus lumped leg masses: the M the controllers compensate.
  double total_mass() const { return mass + 2.0 * leg_mass; }
  void validate() const;
};

struct WireState {
  bool attached = false;
  Vec3 anchor = Vec3::Zero();
  double length = 0.0;   ///< paid-out length measured at the winch
  double rate = 0.0;     ///< paid-out rate, positive when paying out
  double tension = 0.0;  ///< cable tension, never negative
  double current = 0.0;  ///< last applied motor current

  friend bool operator==(const WireState&, const WireState&) = default;
};

struct PayloadState {
  PayloadSpec spec;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  bool grasped = false;
  Vec3 body_offset = Vec3::Zero();  ///< body-frame center while grasped
  std::array<double, 2> wheel_force{0.0, 0.0};
};

/// Contact points: driven wheels then knee omni wheels, left before right.
enum ContactIndex { kLeftWheel = 0, kRightWheel = 1, kLeftKnee = 2, kRightKnee = 3, kContactCount = 4 };

struct ContactReport {
  std::array<double, kContactCount> normal_force{};
  std::array<int, kContactCount> patch{-1, -1, -1, -1};  ///< dominant terrain patch
  double body_force = 0.0;                                ///< sum over cube corners

  double wheel_total() const;
  bool any_above(double threshold) const;
};

struct SimState {
  BodyState body;
  Vec3 angular_momentum = Vec3::Zero();  ///< world frame; integrated state
  LegJointState legs;
  std::array<WireState, kAnchorWires> wires{};
  std::vector<PayloadState> payloads;
  bool tool_attached = false;
  ContactReport contacts;
  double time = 0.0;

  int attached_count() const;
  std::vector<int> attached_indices() const;
  std::vector<WireGeometry> attached_geometry(const RobotParams& params) const;
  friend bool operator==(const SimState&, const SimState&) = delete;
};

struct ActuatorCommand {
  WireVec currents = WireVec::Zero();
  JointVector joints = JointVector::Zero();
  std::array<double, 2> wheel_speeds{0.0, 0.0};
};

/// Initial state at rest with the angular momentum consistent with the body.
SimState make_state(const BodyState& body, const LegJointState& legs, const WorldModel& world,
                    const RobotParams& params);

/// World-frame inertia of the body and everything rigidly attached to it.
Mat3 world_inertia(const SimState& state, const RobotParams& params);
double moving_mass(const SimState& state, const RobotParams& params);

/// Advance one fixed step with semi-implicit Euler. Throws NumericalDivergence.
SimState step(const SimState& state, const ActuatorCommand& cmd, const WorldModel& world,
              const RobotParams& params, double dt);

/// Attach a detached wire; its length starts at the geometric distance.
SimState attach_wire(const SimState& state, int wire, const Vec3& anchor, const RobotParams& params);
SimState detach_wire(const SimState& state, int wire);

/// Pre-stretch attached wires so they start out carrying `tensions`
/// (indexed like attached_indices()).
SimState pretension_wires(const SimState& state, const VecX& tensions, const RobotParams& params);

/// Penalty contact forces at the current state.
ContactReport contact_flags(const SimState& state, const WorldModel& world,
                            const RobotParams& params);

/// Geometric length and length rate of every attached wire.
struct WireKinematics {
  std::vector<int> indices;
  VecX lengths;
  VecX rates;
};
WireKinematics wire_kinematics(const SimState& state, const RobotParams& params);

/// Kinetic + gravitational + cable spring + winch kinetic energy.
double mechanical_energy(const SimState& state, const WorldModel& world, const RobotParams& params);

/// Wheel and knee centers in the world frame, contact order.
std::array<Vec3, kContactCount> contact_centers(const SimState& state, const RobotParams& params);

}  // namespace cablebot
