#include "cablebot/runtime.hpp"

#include "cablebot/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace cablebot {

int ControlConfig::steps_per_tick() const {
  return std::max(1, static_cast<int>(std::lround(1.0 / (rate_hz * physics_dt))));
}

void ControlConfig::validate() const {
  if (!(physics_dt > 0.0) || physics_dt > 0.01) {
    throw ConfigError("control.physics_dt must be in (0, 0.01]");
  }
  if (!(rate_hz > 0.0) || rate_hz * physics_dt > 1.0) {
    throw ConfigError("control.rate_hz must be positive and not above the physics rate");
  }
  const double ratio = 1.0 / (rate_hz * physics_dt);
  if (std::abs(ratio - std::round(ratio)) > 1e-9) {
    throw ConfigError("control.rate_hz must divide the physics rate");
  }
  gains.validate();
  if (!(regularization >= 0.0) || !(feasibility_tol > 0.0)) {
    throw ConfigError("control: regularization >= 0 and feasibility_tol > 0 required");
  }
  if (actuation_delay_ticks < 0 || actuation_delay_ticks > 100) {
    throw ConfigError("control.actuation_delay_ticks must be in [0, 100]");
  }
  if (!(posture.pitch_duration > 0.0) || !(posture.joint_duration > 0.0)) {
    throw ConfigError("control.posture durations must be positive");
  }
}

Runtime::Runtime(WorldModel world, RobotParams params, ControlConfig control, SimState initial,
                 SystemMode mode)
    : world_(std::move(world)),
      params_(std::move(params)),
      control_(std::move(control)),
      state_(std::move(initial)),
      mode_(mode) {
  world_.validate();
  params_.validate();
  control_.validate();
  if (!mode_.valid()) {
    throw ConfigError("initial mode pairs an arm mode with a non-CoG wire mode");
  }
  record_.joint_ref = state_.legs.joints();
  command_.joints = state_.legs.joints();
  command_.wheel_speeds = state_.legs.wheel_speed;
  tool_phase_since_ = -std::numeric_limits<double>::infinity();
}

void Runtime::set_wire_rates(const VecX& rates) {
  if (rates.size() == kAnchorWires) {
    wire_rates_ = rates;
    return;
  }
  const auto idx = state_.attached_indices();
  if (rates.size() != static_cast<Eigen::Index>(idx.size())) {
    throw ConfigError("set_wire_rates: expected 4 rates or one per attached wire");
  }
  wire_rates_.setZero();
  for (std::size_t j = 0; j < idx.size(); ++j) {
    wire_rates_(idx[j]) = rates(static_cast<Eigen::Index>(j));
  }
}

void Runtime::set_drive(double forward_velocity, double yaw_rate) {
  forward_velocity_ = forward_velocity;
  yaw_rate_ = yaw_rate;
}

void Runtime::set_manip_target(const ManipTarget& target) {
  manip_ik(target, params_.legs);  // throws Unreachable before anything changes
  manip_target_ = target;
  wheel_spin_ = target.wheel_spin;
}

void Runtime::set_tool_phase(ToolPhase phase) {
  if (phase == tool_phase_) return;
  tool_phase_ = phase;
  tool_phase_since_ = state_.time;
}

GuardContext Runtime::guard_context() const {
  GuardContext ctx;
  ctx.attached_wires = state_.attached_count();
  if (ctx.attached_wires > 0) {
    const auto idx = state_.attached_indices();
    const WireJacobian jac = build_jacobian(state_.body, state_.attached_geometry(params_));
    TensionLimits lim;
    lim.f_min.resize(jac.wire_count());
    lim.f_max.resize(jac.wire_count());
    for (std::size_t j = 0; j < idx.size(); ++j) {
      lim.f_min(static_cast<Eigen::Index>(j)) = params_.limits.f_min(idx[j]);
      lim.f_max(static_cast<Eigen::Index>(j)) = params_.limits.f_max(idx[j]);
    }
    ctx.wrench_feasible =
        wrench_feasible(jac, gravity_wrench(compensated_mass(), world_.gravity), lim,
                        control_.feasibility_tol)
            .feasible;
  }
  ctx.ground_contact =
      contact_flags(state_, world_, params_).any_above(params_.contact.contact_threshold);
  return ctx;
}

TransitionResult Runtime::request_transition(const TransitionRequest& req) {
  const SystemMode before = mode_;
  TransitionResult result = cablebot::request_transition(mode_, req, guard_context());
  if (!result.accepted) {
    std::ostringstream msg;
    msg << "transition rejected: " << to_string(*result.reason) << " (" << result.message << ")";
    notes_.push_back(msg.str());
    return result;
  }
  mode_ = result.mode;
  if (mode_ == before) return result;

  if (mode_.wire != before.wire) {
    cog_velocity_.setZero();
    wire_rates_.setZero();
  }
  if (mode_.leg != before.leg) {
    forward_velocity_ = 0.0;
    yaw_rate_ = 0.0;
    wheel_spin_ = 0.0;
    manip_target_.reset();
    if (mode_.leg == LegMode::ToolUtilization) {
      tool_phase_ = ToolPhase::Open;
      tool_phase_since_ = -std::numeric_limits<double>::infinity();
    }
  }
  posture_ = posture_sequence(before, mode_, control_.posture);
  if (!posture_.empty()) {
    segment_index_ = 0;
    segment_start_ = state_.time;
    segment_from_ = record_.joint_ref;
    begin_segment();
  }
  return result;
}

// A pitch segment turns the body until the axis that the nominal rotation
// brings upright is aligned with gravity, so a body that already hangs in the
// target attitude is not rotated further.
void Runtime::begin_segment() {
  segment_rate_.setZero();
  const PostureSegment& seg = posture_[segment_index_];
  if (seg.body_rate.isZero() || !(seg.duration > 0.0) || world_.gravity.isZero()) return;
  const Vec3 up_body = needs_suspension(mode_.leg) ? Vec3::UnitX() : Vec3::UnitZ();
  const Vec3 up_world = -world_.gravity.normalized();
  const Vec3 current = state_.body.orientation * up_body;
  Vec3 axis = current.cross(up_world);
  const double angle = std::atan2(axis.norm(), current.dot(up_world));
  if (axis.norm() < 1e-9) {
    if (angle < 1e-6) return;
    axis = state_.body.orientation * seg.body_rate;
  }
  segment_rate_ = axis.normalized() * (angle / seg.duration);
}

void Runtime::attach_wire(int wire, const Vec3& anchor) {
  state_ = cablebot::attach_wire(state_, wire, anchor, params_);
}

void Runtime::detach_wire(int wire) { state_ = cablebot::detach_wire(state_, wire); }

void Runtime::attach_tool() {
  if (state_.tool_attached) return;
  const double m_before = moving_mass(state_, params_);
  state_.tool_attached = true;
  state_.body.linear_velocity *= m_before / moving_mass(state_, params_);
  state_.body.angular_velocity = world_inertia(state_, params_).ldlt().solve(state_.angular_momentum);
}

void Runtime::release_payloads() {
  for (auto& p : state_.payloads) {
    if (!p.grasped) continue;
    const Vec3 r = state_.body.orientation * p.body_offset;
    p.grasped = false;
    p.position = state_.body.position + r;
    p.velocity = state_.body.linear_velocity + state_.body.angular_velocity.cross(r);
  }
  state_.body.angular_velocity = world_inertia(state_, params_).ldlt().solve(state_.angular_momentum);
}

void Runtime::spawn_payload(const PayloadSpec& spec) {
  if (!(spec.mass > 0.0) || !(spec.radius > 0.0)) {
    throw ConfigError("payload mass and radius must be positive");
  }
  PayloadState p;
  p.spec = spec;
  p.position = spec.position;
  state_.payloads.push_back(p);
}

std::vector<std::string> Runtime::take_notes() {
  std::vector<std::string> out;
  out.swap(notes_);
  return out;
}

double Runtime::compensated_mass() const { return moving_mass(state_, params_); }

WireVec Runtime::wire_currents(Vec6& cog_ref_used, WireVec& rate_ref_used, WireVec& tension_ref,
                               bool& converged) {
  WireVec currents = WireVec::Zero();
  cog_ref_used.setZero();
  rate_ref_used.setZero();
  tension_ref.setZero();
  converged = true;

  const auto idx = state_.attached_indices();
  const auto m = static_cast<Eigen::Index>(idx.size());
  if (mode_.wire == WireMode::Free || m == 0) {
    const VecX zero = free_mode(m);
    for (Eigen::Index j = 0; j < m; ++j) currents(idx[static_cast<std::size_t>(j)]) = zero(j);
    return currents;
  }

  TensionLimits lim;
  lim.f_min.resize(m);
  lim.f_max.resize(m);
  VecX l_dot(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const int i = idx[static_cast<std::size_t>(j)];
    lim.f_min(j) = params_.limits.f_min(i);
    lim.f_max(j) = params_.limits.f_max(i);
    l_dot(j) = state_.wires[static_cast<std::size_t>(i)].rate;
  }
  const double mass = compensated_mass();
  const double g_norm = world_.gravity.norm();

  VecX f_ref(m);
  if (mode_.wire == WireMode::WireVelocity) {
    VecX ref(m);
    for (Eigen::Index j = 0; j < m; ++j) ref(j) = wire_rates_(idx[static_cast<std::size_t>(j)]);
    f_ref = wire_velocity_tensions(l_dot, ref, mass, g_norm, control_.gains, lim);
    for (Eigen::Index j = 0; j < m; ++j) rate_ref_used(idx[static_cast<std::size_t>(j)]) = ref(j);
  } else {
    Vec6 twist = cog_velocity_;
    if (!posture_.empty() && segment_index_ < posture_.size()) {
      twist.setZero();
      twist.tail<3>() = segment_rate_;
    }
    const WireJacobian jac = build_jacobian(state_.body, state_.attached_geometry(params_));
    QpOptions qp_options;
    qp_options.regularization = control_.regularization;
    const TensionSolution qp =
        solve_tension_qp(jac, gravity_wrench(mass, world_.gravity), lim, qp_options);
    converged = qp.converged;
    f_ref = cog_velocity_tensions(state_.body, jac, l_dot, twist, qp, control_.gains, lim);
    cog_ref_used = twist;
    const VecX target_rates = -(jac.matrix.transpose() * twist);
    for (Eigen::Index j = 0; j < m; ++j) rate_ref_used(idx[static_cast<std::size_t>(j)]) = target_rates(j);
  }

  // Friction feed-forward is normalized by the robot weight used when the
  // winches were identified.
  const VecX i_ref = tension_to_current(f_ref, params_.winch.select(idx), params_.total_mass(), g_norm);
  for (Eigen::Index j = 0; j < m; ++j) {
    const int i = idx[static_cast<std::size_t>(j)];
    currents(i) = i_ref(j);
    tension_ref(i) = f_ref(j);
  }
  return currents;
}

void Runtime::control_tick() {
  const double now = state_.time;

  // Advance the posture script.
  std::optional<JointVector> script_joints;
  if (!posture_.empty()) {
    while (segment_index_ < posture_.size() &&
           now - segment_start_ >= posture_[segment_index_].duration - 1e-12) {
      const auto& seg = posture_[segment_index_];
      if (seg.joints) segment_from_ = *seg.joints;
      segment_start_ += seg.duration;
      ++segment_index_;
      if (segment_index_ < posture_.size()) begin_segment();
    }
    if (segment_index_ >= posture_.size()) {
      posture_.clear();
    } else {
      const auto& seg = posture_[segment_index_];
      if (seg.joints) {
        const double alpha = std::clamp((now - segment_start_) / seg.duration, 0.0, 1.0);
        script_joints = segment_from_ + alpha * (*seg.joints - segment_from_);
      } else {
        script_joints = segment_from_;
      }
    }
  }

  TickRecord rec;
  rec.currents = wire_currents(rec.cog_velocity_ref, rec.wire_rate_ref, rec.tension_ref, rec.qp_converged);

  const auto& lp = params_.legs;
  JointVector joints = record_.joint_ref;
  std::array<double, 2> wheels{0.0, 0.0};
  switch (mode_.leg) {
    case LegMode::WheelDriving: {
      joints = control_.posture.vehicle;
      joints(1) += hip_pitch_offset_;
      joints(4) += hip_pitch_offset_;
      const WheelSpeeds w = drive_wheel_speeds(forward_velocity_, yaw_rate_, lp, state_.legs);
      wheels = {w.left, w.right};
      break;
    }
    case LegMode::Manipulation:
      joints = manip_target_ ? manipulation_joints(manip_ik(*manip_target_, lp))
                             : control_.posture.arm_ready;
      wheels = {wheel_spin_, wheel_spin_};
      break;
    case LegMode::ToolUtilization:
      joints = tool_phase_targets(control_.posture.tool, tool_phase_, now - tool_phase_since_);
      break;
  }
  if (script_joints) {
    joints = *script_joints;
    wheels = {0.0, 0.0};
  }
  rec.joint_ref = lp.clamp(joints);
  rec.wheel_ref = wheels;

  ActuatorCommand next;
  next.currents = rec.currents;
  next.joints = rec.joint_ref;
  next.wheel_speeds = wheels;
  in_flight_.push_back(next);
  if (static_cast<int>(in_flight_.size()) > control_.actuation_delay_ticks) {
    command_ = in_flight_.front();
    in_flight_.pop_front();
  }
  record_ = rec;
}

void Runtime::update_controls() {
  if (on_tick_boundary() && ticked_at_ != step_count_) {
    control_tick();
    ticked_at_ = step_count_;
  }
}

void Runtime::step_once() {
  update_controls();
  state_ = step(state_, command_, world_, params_, control_.physics_dt);
  ++step_count_;
}

void Runtime::run_tick() {
  do {
    step_once();
  } while (!on_tick_boundary());
}

}  // namespace cablebot
