#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cablebot/errors.hpp"
#include "cablebot/leg_controller.hpp"
#include "support.hpp"

#include <numbers>

using namespace cablebot;
using cablebot::testing::Gen;
using cablebot::testing::rot_x;
using cablebot::testing::rot_y;

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::Matrix4d transform(const Mat3& r, const Vec3& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = t;
  return m;
}

// Chain of homogeneous transforms: hip offset, roll about x, pitch about y,
// thigh down its local -z, knee pitch, calf down its local -z.
Vec3 wheel_center_oracle(const LegParams& p, Side side, const LegAngles& a) {
  const Eigen::Matrix4d t = transform(Mat3::Identity(), p.hip_position(side)) *
                            transform(rot_x(side_sign(side) * a.hip_roll), Vec3::Zero()) *
                            transform(rot_y(a.hip_pitch), Vec3::Zero()) *
                            transform(Mat3::Identity(), Vec3(0, 0, -p.thigh_length)) *
                            transform(rot_y(a.knee_pitch), Vec3::Zero()) *
                            transform(Mat3::Identity(), Vec3(0, 0, -p.calf_length));
  return t.topRightCorner<3, 1>();
}

LegJointState random_posture(Gen& gen) {
  LegJointState s;
  for (auto& leg : s.legs) {
    leg.hip_roll = gen.uniform(-0.3, 0.3);
    leg.hip_pitch = gen.uniform(-kPi / 2, kPi / 4);
    leg.knee_pitch = gen.uniform(0.0, 2.5);
  }
  return s;
}

}  // namespace

TEST_CASE("straight line and spin in place") {
  const LegParams p;
  LegJointState straight;  // legs straight down: h = hip_lateral
  WheelSpeeds w = drive_wheel_speeds(0.5, 0.0, p, straight);
  CHECK(w.left == doctest::Approx(10.0));
  CHECK(w.right == doctest::Approx(10.0));

  LegParams wide = p;
  wide.hip_lateral = 0.2;
  w = drive_wheel_speeds(0.0, 1.0, wide, straight);
  CHECK(w.left == doctest::Approx(-4.0));
  CHECK(w.right == doctest::Approx(4.0));
}

TEST_CASE("track width") {
  const LegParams p;
  LegJointState straight;
  TrackWidth h = track_width(straight, p);
  CHECK(h.left == doctest::Approx(p.hip_lateral).epsilon(1e-15));
  CHECK(h.right == doctest::Approx(p.hip_lateral).epsilon(1e-15));

  LegJointState v;
  v.set_joints(vehicle_posture(p));
  h = track_width(v, p);
  CHECK(h.left == h.right);
}

TEST_CASE("wheel center matches the homogeneous transform chain") {
  Gen gen(101);
  const LegParams p;
  for (int trial = 0; trial < 1000; ++trial) {
    const LegJointState s = random_posture(gen);
    for (Side side : {Side::Left, Side::Right}) {
      const Vec3 fk = wheel_center(p, side, s.leg(side));
      CHECK((fk - wheel_center_oracle(p, side, s.leg(side))).norm() < 1e-9);
    }
    const TrackWidth h = track_width(s, p);
    CHECK(std::abs(h.left - std::abs(wheel_center_oracle(p, Side::Left, s.leg(Side::Left)).y())) < 1e-9);
    CHECK(std::abs(h.right - std::abs(wheel_center_oracle(p, Side::Right, s.leg(Side::Right)).y())) < 1e-9);
  }
}

TEST_CASE("wheel odometry recovers the drive command") {
  Gen gen(3);
  const LegParams p;
  for (int trial = 0; trial < 1000; ++trial) {
    LegJointState s = random_posture(gen);
    const double v = gen.uniform(-1.0, 1.0);
    const double yaw = gen.uniform(-2.0, 2.0);
    const WheelSpeeds w = drive_wheel_speeds(v, yaw, p, s);
    const TrackWidth h = track_width(s, p);
    // Wheel rim speeds integrate to body motion.
    const double vl = w.left * p.wheel_radius;
    const double vr = w.right * p.wheel_radius;
    const double yaw_back = (vr - vl) / (h.left + h.right);
    const double v_back = (vl * h.right + vr * h.left) / (h.left + h.right);
    CHECK(std::abs(yaw_back - yaw) < 1e-12);
    CHECK(std::abs(v_back - v) < 1e-12);
  }
}

TEST_CASE("drive command is linear") {
  Gen gen(4);
  const LegParams p;
  const LegJointState s = random_posture(gen);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = gen.uniform(-2, 2), b = gen.uniform(-2, 2);
    const double v1 = gen.uniform(-1, 1), y1 = gen.uniform(-1, 1);
    const double v2 = gen.uniform(-1, 1), y2 = gen.uniform(-1, 1);
    const WheelSpeeds w1 = drive_wheel_speeds(v1, y1, p, s);
    const WheelSpeeds w2 = drive_wheel_speeds(v2, y2, p, s);
    const WheelSpeeds w = drive_wheel_speeds(a * v1 + b * v2, a * y1 + b * y2, p, s);
    CHECK(w.left == doctest::Approx(a * w1.left + b * w2.left).epsilon(1e-12));
    CHECK(w.right == doctest::Approx(a * w1.right + b * w2.right).epsilon(1e-12));
  }
}

TEST_CASE("two link inverse kinematics examples") {
  const LegParams p;
  ArmAngles a = arm_ik(Eigen::Vector2d(0.46, 0.0), p);
  CHECK(a.hip_pitch == doctest::Approx(0.0));
  CHECK(a.knee_pitch == doctest::Approx(0.0));
  a = arm_ik(Eigen::Vector2d(0.23, 0.23), p);
  CHECK(a.knee_pitch == doctest::Approx(kPi / 2).epsilon(1e-12));
  CHECK(std::abs(a.hip_pitch) < 1e-12);
}

TEST_CASE("inverse kinematics round trip and unreachable targets") {
  Gen gen(1000);
  LegParams p;
  for (int trial = 0; trial < 1000; ++trial) {
    p.thigh_length = gen.uniform(0.1, 0.4);
    p.calf_length = gen.uniform(0.1, 0.4);
    const double lo = std::abs(p.thigh_length - p.calf_length);
    const double hi = p.thigh_length + p.calf_length;
    const double reach = gen.uniform(lo + 1e-6, hi);
    const double angle = gen.uniform(-kPi, kPi);
    const Eigen::Vector2d target(reach * std::cos(angle), reach * std::sin(angle));
    const ArmAngles a = arm_ik(target, p);
    CHECK(a.knee_pitch >= 0.0);
    CHECK(a.knee_pitch <= kPi);
    CHECK((arm_fk(a, p) - target).norm() < 1e-9);

    const double outside = gen.integer(0, 1) ? hi * gen.uniform(1.001, 3.0) : lo * gen.uniform(0.0, 0.999);
    const int leg = gen.integer(0, 1);
    try {
      arm_ik(Eigen::Vector2d(outside * std::cos(angle), outside * std::sin(angle)), p, leg);
      FAIL("expected Unreachable");
    } catch (const Unreachable& e) {
      CHECK(e.leg() == leg);
    }
  }
}

TEST_CASE("grasp targets") {
  const LegParams p;
  ManipTarget t;
  t.p_target = Vec3(-0.3, 0.0, 0.0);
  t.width = 0.1;
  const ManipSolution sol = manip_ik(t, p);
  // Symmetric target: both arms solve the same planar problem.
  CHECK((sol.p_arm[0] - sol.p_arm[1]).norm() < 1e-15);
  CHECK(sol.arms[0].hip_pitch == doctest::Approx(sol.arms[1].hip_pitch));
  CHECK(sol.arms[0].knee_pitch == doctest::Approx(sol.arms[1].knee_pitch));

  const JointVector q = manipulation_joints(sol);
  LegJointState s;
  s.set_joints(q);
  for (Side side : {Side::Left, Side::Right}) {
    // The wheel center sits R from the contact point, toward the hip.
    const Vec3 contact(t.p_target.x(), t.p_target.y() + side_sign(side) * 0.5 * t.width, 0.0);
    const Vec3 wheel = wheel_center(p, side, s.leg(side));
    CHECK((wheel - contact).norm() == doctest::Approx(p.wheel_radius).epsilon(1e-9));
    CHECK(std::abs(wheel.z()) < 1e-12);
  }

  t.p_target = Vec3(-2.0, 0.0, 0.0);
  CHECK_THROWS_AS(manip_ik(t, p), Unreachable);
  t.width = -0.1;
  CHECK_THROWS_AS(manip_ik(t, p), ConfigError);
}

TEST_CASE("sagittal targets give mirror consistent arms") {
  Gen gen(55);
  const LegParams p;
  for (int trial = 0; trial < 200; ++trial) {
    ManipTarget t;
    t.p_target = Vec3(gen.uniform(-0.45, -0.1), 0.0, 0.0);
    t.width = gen.uniform(0.0, 0.3);
    ManipSolution sol;
    try {
      sol = manip_ik(t, p);
    } catch (const Unreachable&) {
      continue;
    }
    CHECK(sol.arms[0].hip_pitch == doctest::Approx(sol.arms[1].hip_pitch).epsilon(1e-12));
    CHECK(sol.arms[0].knee_pitch == doctest::Approx(sol.arms[1].knee_pitch).epsilon(1e-12));
  }
}

TEST_CASE("tool playback") {
  const LegParams p;
  const ToolPosePair pair = default_tool_poses(p);
  CHECK(tool_phase_targets(pair, ToolPhase::Closed, 0.0) == pair.open_pose);
  CHECK(tool_phase_targets(pair, ToolPhase::Closed, pair.transition_time) == pair.closed_pose);
  CHECK(tool_phase_targets(pair, ToolPhase::Closed, 5.0) == pair.closed_pose);
  CHECK(tool_phase_targets(pair, ToolPhase::Open, 5.0) == pair.open_pose);
  const JointVector mid = tool_phase_targets(pair, ToolPhase::Closed, 0.5 * pair.transition_time);
  CHECK((mid - 0.5 * (pair.open_pose + pair.closed_pose)).norm() < 1e-12);

  Gen gen(9);
  for (int trial = 0; trial < 500; ++trial) {
    const ToolPhase phase = gen.integer(0, 1) ? ToolPhase::Open : ToolPhase::Closed;
    const JointVector q = tool_phase_targets(pair, phase, gen.uniform(-1.0, 3.0));
    const JointVector lo = pair.open_pose.cwiseMin(pair.closed_pose);
    const JointVector hi = pair.open_pose.cwiseMax(pair.closed_pose);
    CHECK(((q - lo).array() >= -1e-15).all());
    CHECK(((hi - q).array() >= -1e-15).all());
  }
}

TEST_CASE("canonical postures") {
  const LegParams p;
  LegJointState v;
  v.set_joints(vehicle_posture(p));
  CHECK(p.within_limits(v.joints()));
  for (Side side : {Side::Left, Side::Right}) {
    // Wheel and knee omni wheel touch the same floor.
    const double wheel_bottom = wheel_center(p, side, v.leg(side)).z() - p.wheel_radius;
    const double knee_bottom = knee_position(p, side, v.leg(side)).z() - p.support_wheel_radius;
    CHECK(wheel_bottom == doctest::Approx(knee_bottom).epsilon(1e-12));
    CHECK(wheel_axis(p, side, v.leg(side)).isApprox(Vec3::UnitY()));
  }
  CHECK(p.within_limits(arm_ready_posture(p)));
  const ToolPosePair tool = default_tool_poses(p);
  CHECK(p.within_limits(tool.open_pose));
  CHECK(p.within_limits(tool.closed_pose));
  CHECK_FALSE(p.within_limits(JointVector::Constant(10.0)));
  CHECK(p.within_limits(p.clamp(JointVector::Constant(10.0))));
}

TEST_CASE("joint vector round trip and names") {
  JointVector q;
  q << 1, 2, 3, 4, 5, 6;
  LegJointState s;
  s.set_joints(q);
  CHECK(s.leg(Side::Right).hip_pitch == 5.0);
  CHECK(s.joints() == q);
  for (LegMode m : {LegMode::WheelDriving, LegMode::Manipulation, LegMode::ToolUtilization}) {
    CHECK(leg_mode_from_string(to_string(m)) == m);
  }
  CHECK(tool_phase_from_string("Closed") == ToolPhase::Closed);
  CHECK_THROWS_AS(leg_mode_from_string("Walking"), ConfigError);
  CHECK_THROWS_AS(tool_phase_from_string("Half"), ConfigError);
  LegParams bad;
  bad.wheel_radius = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
