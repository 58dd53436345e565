#pragma once

#include "cablebot/mode_machine.hpp"
#include "cablebot/sim_world.hpp"

#include <deque>
#include <optional>
#include <string>
#include <vector>

namespace cablebot {

struct ControlConfig {
  double physics_dt = 1e-3;
  double rate_hz = 200.0;  ///< controller tick rate; must divide the physics rate
  ControllerGains gains;
  double regularization = kDefaultRegularization;
  double feasibility_tol = 1.0;  ///< N of unbalanced force tolerated by the CoG guard
  /// Ticks between computing a command and the actuators receiving it; one
  /// models the read-compute-send cycle of an onboard loop.
  int actuation_delay_ticks = 1;
  PostureConfig posture = PostureConfig::defaults(LegParams{});

  int steps_per_tick() const;
  void validate() const;
};

/// What the controllers commanded on the latest tick.
struct TickRecord {
  Vec6 cog_velocity_ref = Vec6::Zero();
  WireVec wire_rate_ref = WireVec::Zero();
  WireVec tension_ref = WireVec::Zero();
  WireVec currents = WireVec::Zero();
  std::array<double, 2> wheel_ref{0.0, 0.0};
  JointVector joint_ref = JointVector::Zero();
  bool qp_converged = true;
};

/// Fixed-rate supervisory loop: the mode state machine, both controllers and
/// the plant. Single-threaded; inputs are applied between control ticks.
class Runtime {
 public:
  Runtime(WorldModel world, RobotParams params, ControlConfig control, SimState initial,
          SystemMode mode);

  // Operator / scenario inputs.
  void set_cog_velocity(const Vec6& twist) { cog_velocity_ = twist; }
  /// Either one rate per wire slot (4) or one per attached wire in slot order.
  void set_wire_rates(const VecX& rates);
  void set_drive(double forward_velocity, double yaw_rate);
  void set_hip_pitch_offset(double offset) { hip_pitch_offset_ = offset; }
  /// Throws Unreachable without changing the current target.
  void set_manip_target(const ManipTarget& target);
  void set_wheel_spin(double spin) { wheel_spin_ = spin; }
  void set_tool_phase(ToolPhase phase);
  TransitionResult request_transition(const TransitionRequest& req);
  void attach_wire(int wire, const Vec3& anchor);
  void detach_wire(int wire);
  void attach_tool();
  void release_payloads();
  void spawn_payload(const PayloadSpec& spec);

  /// Runs the controllers if this step is a tick boundary and they have not
  /// run for it yet. Lets callers observe fresh references before stepping.
  void update_controls();
  /// One physics step; runs the controllers first when on a tick boundary.
  void step_once();
  /// Steps up to and including the next tick boundary's physics steps.
  void run_tick();

  bool on_tick_boundary() const { return step_count_ % control_.steps_per_tick() == 0; }
  const SimState& state() const { return state_; }
  const SystemMode& mode() const { return mode_; }
  const TickRecord& record() const { return record_; }
  const WorldModel& world() const { return world_; }
  const RobotParams& params() const { return params_; }
  const ControlConfig& control() const { return control_; }
  long step_count() const { return step_count_; }
  bool posture_active() const { return !posture_.empty(); }
  GuardContext guard_context() const;
  /// Messages produced since the last call (rejections, unreachable targets).
  std::vector<std::string> take_notes();

 private:
  void control_tick();
  void begin_segment();
  WireVec wire_currents(Vec6& cog_ref_used, WireVec& rate_ref_used, WireVec& tension_ref,
                        bool& converged);
  double compensated_mass() const;

  WorldModel world_;
  RobotParams params_;
  ControlConfig control_;
  SimState state_;
  SystemMode mode_;
  long step_count_ = 0;
  long ticked_at_ = -1;

  Vec6 cog_velocity_ = Vec6::Zero();
  WireVec wire_rates_ = WireVec::Zero();
  double forward_velocity_ = 0.0;
  double yaw_rate_ = 0.0;
  double hip_pitch_offset_ = 0.0;
  std::optional<ManipTarget> manip_target_;
  double wheel_spin_ = 0.0;
  ToolPhase tool_phase_ = ToolPhase::Open;
  double tool_phase_since_ = 0.0;

  std::vector<PostureSegment> posture_;
  JointVector segment_from_ = JointVector::Zero();
  std::size_t segment_index_ = 0;
  double segment_start_ = 0.0;
  Vec3 segment_rate_ = Vec3::Zero();

  ActuatorCommand command_;
  std::deque<ActuatorCommand> in_flight_;
  TickRecord record_;
  std::vector<std::string> notes_;
};

}  // namespace cablebot
