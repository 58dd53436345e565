#pragma once

#include "cablebot/leg_controller.hpp"
#include "cablebot/wire_controller.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cablebot {

/// Product of the wire-drive mode and the wheeled-leg mode. Arm modes need
/// the body hanging on the wires, so they only pair with CogVelocity.
struct SystemMode {
  WireMode wire = WireMode::Free;
  LegMode leg = LegMode::WheelDriving;

  bool valid() const;
  friend bool operator==(const SystemMode&, const SystemMode&) = default;
};

/// True for leg modes that use the legs as arms.
bool needs_suspension(LegMode mode);

enum class TransitionSource { Operator, Scenario };

struct TransitionRequest {
  SystemMode requested;
  TransitionSource source = TransitionSource::Operator;
};

enum class GuardFailure { InsufficientWires, GroundContact, InfeasibleWrench, InvalidCombination };

std::string_view to_string(GuardFailure reason);

/// Facts about the current plant state the guards depend on.
struct GuardContext {
  int attached_wires = 0;
  bool wrench_feasible = false;  ///< gravity force realizable at the current pose
  bool ground_contact = false;   ///< any wheel contact force above threshold
};

struct TransitionResult {
  bool accepted = false;
  SystemMode mode;  ///< resulting mode; the current one on rejection
  std::optional<GuardFailure> reason;
  std::string message;
};

/// Pure decision: either the requested mode or a rejection that keeps `current`.
TransitionResult request_transition(const SystemMode& current, const TransitionRequest& req,
                                    const GuardContext& ctx);

/// One timed step of a posture change. Joint targets are reached by linear
/// interpolation over the segment; body_rate is a body-frame angular rate
/// held for the whole segment.
struct PostureSegment {
  double duration = 0.0;
  std::optional<JointVector> joints;
  Vec3 body_rate = Vec3::Zero();
  std::string label;
};

struct PostureConfig {
  JointVector vehicle;
  JointVector arm_ready;
  ToolPosePair tool;
  double pitch_duration = 3.0;  ///< s for the 90 degree reorientation
  double joint_duration = 1.5;  ///< s per joint move

  static PostureConfig defaults(const LegParams& params);
};

/// Setpoint script that carries the robot from one mode's canonical posture
/// to the other's. Empty for identity and wire-only changes.
std::vector<PostureSegment> posture_sequence(const SystemMode& from, const SystemMode& to,
                                             const PostureConfig& config);

double total_duration(const std::vector<PostureSegment>& script);

}  // namespace cablebot
