#include "cablebot/mode_machine.hpp"

#include <numbers>

namespace cablebot {

bool needs_suspension(LegMode mode) { return mode != LegMode::WheelDriving; }

bool SystemMode::valid() const { return !needs_suspension(leg) || wire == WireMode::CogVelocity; }

std::string_view to_string(GuardFailure reason) {
  switch (reason) {
    case GuardFailure::InsufficientWires:
      return "InsufficientWires";
    case GuardFailure::GroundContact:
      return "GroundContact";
    case GuardFailure::InfeasibleWrench:
      return "InfeasibleWrench";
    case GuardFailure::InvalidCombination:
      return "InvalidCombination";
  }
  return "InvalidCombination";
}

namespace {

TransitionResult reject(const SystemMode& current, GuardFailure reason, std::string message) {
  return {false, current, reason, std::move(message)};
}

}  // namespace

TransitionResult request_transition(const SystemMode& current, const TransitionRequest& req,
                                    const GuardContext& ctx) {
  const SystemMode& to = req.requested;
  if (to == current) {
    return {true, current, std::nullopt, "no-op"};
  }

  const bool entering_cog = to.wire == WireMode::CogVelocity && current.wire != WireMode::CogVelocity;
  const bool entering_arm = needs_suspension(to.leg) && to.leg != current.leg;

  if ((to.wire == WireMode::CogVelocity || needs_suspension(to.leg)) && ctx.attached_wires < 2) {
    return reject(current, GuardFailure::InsufficientWires,
                  "CoG velocity control and arm modes need at least 2 attached wires");
  }
  if (to.wire == WireMode::WireVelocity && ctx.attached_wires < 1) {
    return reject(current, GuardFailure::InsufficientWires,
                  "wire velocity control needs an attached wire");
  }
  if (!to.valid()) {
    return reject(current, GuardFailure::InvalidCombination,
                  "arm modes require CoG velocity control of the wires");
  }
  if (entering_cog && !ctx.wrench_feasible) {
    return reject(current, GuardFailure::InfeasibleWrench,
                  "wires cannot balance gravity at the current pose");
  }
  if (entering_arm && ctx.ground_contact) {
    return reject(current, GuardFailure::GroundContact,
                  "legs can only become arms once the body is suspended");
  }
  return {true, to, std::nullopt, "accepted"};
}

PostureConfig PostureConfig::defaults(const LegParams& params) {
  PostureConfig c;
  c.vehicle = vehicle_posture(params);
  c.arm_ready = arm_ready_posture(params);
  c.tool = default_tool_poses(params);
  return c;
}

std::vector<PostureSegment> posture_sequence(const SystemMode& from, const SystemMode& to,
                                             const PostureConfig& config) {
  std::vector<PostureSegment> script;
  if (from.leg == to.leg) {
    return script;
  }
  const double pitch_rate = (std::numbers::pi / 2.0) / config.pitch_duration;
  const bool from_arm = needs_suspension(from.leg);
  const bool to_arm = needs_suspension(to.leg);

  auto target_pose = [&](LegMode mode) -> JointVector {
    switch (mode) {
      case LegMode::WheelDriving:
        return config.vehicle;
      case LegMode::Manipulation:
        return config.arm_ready;
      case LegMode::ToolUtilization:
        return config.tool.open_pose;
    }
    return config.vehicle;
  };

  if (!from_arm && to_arm) {
    // Nose up by 90 degrees so the hip roll axes become yaw axes.
    script.push_back({config.pitch_duration, std::nullopt, Vec3(0.0, -pitch_rate, 0.0), "pitch -90"});
    script.push_back({config.joint_duration, target_pose(to.leg), Vec3::Zero(), "arm pose"});
  } else if (from_arm && !to_arm) {
    script.push_back({config.joint_duration, target_pose(to.leg), Vec3::Zero(), "vehicle pose"});
    script.push_back({config.pitch_duration, std::nullopt, Vec3(0.0, pitch_rate, 0.0), "pitch +90"});
  } else {
    script.push_back({config.joint_duration, target_pose(to.leg), Vec3::Zero(), "arm pose"});
  }
  return script;
}

double total_duration(const std::vector<PostureSegment>& script) {
  double total = 0.0;
  for (const auto& seg : script) {
    total += seg.duration;
  }
  return total;
}

}  // namespace cablebot
