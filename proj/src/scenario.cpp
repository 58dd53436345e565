#include "cablebot/scenario.hpp"

#include "cablebot/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace cablebot {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

double number_or(const json& obj, const char* key, double fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  return number(obj.at(key), where + "." + key);
}

Vec3 vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) fail(where, "expected [x, y, z]");
  return {number(j[0], where), number(j[1], where), number(j[2], where)};
}

VecX vecx(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of numbers");
  VecX v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], where);
  return v;
}

// Scalar broadcast to every wire, or one value per wire slot.
VecX per_wire(const json& j, const std::string& where) {
  if (j.is_number()) return VecX::Constant(kAnchorWires, j.get<double>());
  VecX v = vecx(j, where);
  if (v.size() != kAnchorWires) fail(where, "expected a number or 4 values");
  return v;
}

std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) fail(where, "expected a string");
  return j.get<std::string>();
}

void only_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  if (!obj.is_object()) fail(where, "expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) fail(where, "unknown key '" + item.key() + "'");
  }
}

int wire_slot(const json& args, const std::string& where) {
  if (!args.contains("wire") || !args.at("wire").is_number_integer()) fail(where, "needs integer 'wire' in 1..4");
  const int w = args.at("wire").get<int>();
  if (w < 1 || w > kAnchorWires) fail(where, "wire must be in 1..4");
  return w - 1;
}

SystemMode parse_mode(const json& j, const std::string& where) {
  only_keys(j, {"wire", "leg"}, where);
  SystemMode m;
  try {
    if (j.contains("wire")) m.wire = wire_mode_from_string(text(j.at("wire"), where + ".wire"));
    if (j.contains("leg")) m.leg = leg_mode_from_string(text(j.at("leg"), where + ".leg"));
  } catch (const ConfigError& e) {
    fail(where, e.what());
  }
  return m;
}

void parse_control(const json& j, ControlConfig& c) {
  only_keys(j, {"physics_dt", "rate_hz", "kp_wire", "kp_cog", "regularization", "feasibility_tol",
                "pitch_duration", "joint_duration", "actuation_delay_ticks"},
            "control");
  c.physics_dt = number_or(j, "physics_dt", c.physics_dt, "control");
  c.rate_hz = number_or(j, "rate_hz", c.rate_hz, "control");
  c.gains.kp_wire = number_or(j, "kp_wire", c.gains.kp_wire, "control");
  c.gains.kp_cog = number_or(j, "kp_cog", c.gains.kp_cog, "control");
  c.regularization = number_or(j, "regularization", c.regularization, "control");
  c.feasibility_tol = number_or(j, "feasibility_tol", c.feasibility_tol, "control");
  if (j.contains("actuation_delay_ticks")) {
    if (!j.at("actuation_delay_ticks").is_number_integer()) fail("control.actuation_delay_ticks", "expected an integer");
    c.actuation_delay_ticks = j.at("actuation_delay_ticks").get<int>();
  }
  c.posture.pitch_duration = number_or(j, "pitch_duration", c.posture.pitch_duration, "control");
  c.posture.joint_duration = number_or(j, "joint_duration", c.posture.joint_duration, "control");
}

void parse_robot(const json& j, RobotParams& r) {
  only_keys(j, {"mass", "inertia", "leg_mass", "body_half_extent", "divergence_speed", "legs",
                "winch", "limits", "cable", "contact", "tool", "wire_origins"},
            "robot");
  r.mass = number_or(j, "mass", r.mass, "robot");
  r.leg_mass = number_or(j, "leg_mass", r.leg_mass, "robot");
  r.body_half_extent = number_or(j, "body_half_extent", r.body_half_extent, "robot");
  r.divergence_speed = number_or(j, "divergence_speed", r.divergence_speed, "robot");
  if (j.contains("inertia")) r.inertia = vec3(j.at("inertia"), "robot.inertia").asDiagonal();
  if (j.contains("wire_origins")) {
    const auto& o = j.at("wire_origins");
    if (!o.is_array() || o.size() != kAnchorWires) fail("robot.wire_origins", "expected 4 points");
    for (std::size_t i = 0; i < o.size(); ++i) r.wire_origins[i] = vec3(o[i], "robot.wire_origins");
  }
  if (j.contains("legs")) {
    const auto& l = j.at("legs");
    only_keys(l, {"thigh_length", "calf_length", "wheel_radius", "support_wheel_radius",
                  "hip_lateral", "hip_forward", "hip_height", "joint_rate_limit",
                  "wheel_speed_limit", "wheel_accel_limit"},
              "robot.legs");
    auto& p = r.legs;
    p.thigh_length = number_or(l, "thigh_length", p.thigh_length, "robot.legs");
    p.calf_length = number_or(l, "calf_length", p.calf_length, "robot.legs");
    p.wheel_radius = number_or(l, "wheel_radius", p.wheel_radius, "robot.legs");
    p.support_wheel_radius = number_or(l, "support_wheel_radius", p.support_wheel_radius, "robot.legs");
    p.hip_lateral = number_or(l, "hip_lateral", p.hip_lateral, "robot.legs");
    p.hip_forward = number_or(l, "hip_forward", p.hip_forward, "robot.legs");
    p.hip_height = number_or(l, "hip_height", p.hip_height, "robot.legs");
    p.joint_rate_limit = number_or(l, "joint_rate_limit", p.joint_rate_limit, "robot.legs");
    p.wheel_speed_limit = number_or(l, "wheel_speed_limit", p.wheel_speed_limit, "robot.legs");
    p.wheel_accel_limit = number_or(l, "wheel_accel_limit", p.wheel_accel_limit, "robot.legs");
  }
  if (j.contains("winch")) {
    const auto& w = j.at("winch");
    only_keys(w, {"radius", "kt", "i0", "il"}, "robot.winch");
    r.winch.radius = number_or(w, "radius", r.winch.radius, "robot.winch");
    if (w.contains("kt")) r.winch.torque_constants = per_wire(w.at("kt"), "robot.winch.kt");
    if (w.contains("i0")) r.winch.coulomb_current = per_wire(w.at("i0"), "robot.winch.i0");
    if (w.contains("il")) r.winch.load_friction = per_wire(w.at("il"), "robot.winch.il");
  }
  if (j.contains("limits")) {
    const auto& l = j.at("limits");
    only_keys(l, {"f_min", "f_max"}, "robot.limits");
    if (l.contains("f_min")) r.limits.f_min = per_wire(l.at("f_min"), "robot.limits.f_min");
    if (l.contains("f_max")) r.limits.f_max = per_wire(l.at("f_max"), "robot.limits.f_max");
  }
  if (j.contains("cable")) {
    const auto& c = j.at("cable");
    only_keys(c, {"stiffness", "damping", "winch_mass", "max_length"}, "robot.cable");
    r.cable.stiffness = number_or(c, "stiffness", r.cable.stiffness, "robot.cable");
    r.cable.damping = number_or(c, "damping", r.cable.damping, "robot.cable");
    r.cable.winch_mass = number_or(c, "winch_mass", r.cable.winch_mass, "robot.cable");
    r.cable.max_length = number_or(c, "max_length", r.cable.max_length, "robot.cable");
  }
  if (j.contains("contact")) {
    const auto& c = j.at("contact");
    only_keys(c, {"stiffness", "damping", "slip_damping", "body_slip_damping", "contact_threshold",
                  "grasp_threshold", "body_corners"},
              "robot.contact");
    auto& p = r.contact;
    p.stiffness = number_or(c, "stiffness", p.stiffness, "robot.contact");
    p.damping = number_or(c, "damping", p.damping, "robot.contact");
    p.slip_damping = number_or(c, "slip_damping", p.slip_damping, "robot.contact");
    p.body_slip_damping = number_or(c, "body_slip_damping", p.body_slip_damping, "robot.contact");
    p.contact_threshold = number_or(c, "contact_threshold", p.contact_threshold, "robot.contact");
    p.grasp_threshold = number_or(c, "grasp_threshold", p.grasp_threshold, "robot.contact");
    if (c.contains("body_corners")) {
      if (!c.at("body_corners").is_boolean()) fail("robot.contact.body_corners", "expected a boolean");
      p.body_corners = c.at("body_corners").get<bool>();
    }
  }
  if (j.contains("tool")) {
    const auto& t = j.at("tool");
    only_keys(t, {"mass", "offset"}, "robot.tool");
    r.tool.mass = number_or(t, "mass", r.tool.mass, "robot.tool");
    if (t.contains("offset")) r.tool.offset = vec3(t.at("offset"), "robot.tool.offset");
  }
}

PayloadSpec parse_payload(const json& j, const std::string& where) {
  only_keys(j, {"mass", "radius", "position"}, where);
  PayloadSpec p;
  p.mass = number_or(j, "mass", p.mass, where);
  p.radius = number_or(j, "radius", p.radius, where);
  if (!j.contains("position")) fail(where, "needs 'position'");
  p.position = vec3(j.at("position"), where + ".position");
  return p;
}

void parse_world(const json& j, WorldModel& w) {
  only_keys(j, {"gravity", "terrain", "payloads", "linear_drag", "angular_drag"}, "world");
  if (j.contains("gravity")) w.gravity = vec3(j.at("gravity"), "world.gravity");
  w.linear_drag = number_or(j, "linear_drag", w.linear_drag, "world");
  w.angular_drag = number_or(j, "angular_drag", w.angular_drag, "world");
  if (j.contains("terrain")) {
    w.terrain.clear();
    const auto& t = j.at("terrain");
    if (!t.is_array()) fail("world.terrain", "expected an array");
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::string where = "world.terrain[" + std::to_string(i) + "]";
      only_keys(t[i], {"origin", "edge_u", "edge_v", "friction"}, where);
      TerrainPatch p;
      for (const char* k : {"origin", "edge_u", "edge_v"}) {
        if (!t[i].contains(k)) fail(where, std::string("needs '") + k + "'");
      }
      p.origin = vec3(t[i].at("origin"), where + ".origin");
      p.edge_u = vec3(t[i].at("edge_u"), where + ".edge_u");
      p.edge_v = vec3(t[i].at("edge_v"), where + ".edge_v");
      p.friction = number_or(t[i], "friction", p.friction, where);
      w.terrain.push_back(p);
    }
  }
  if (j.contains("payloads")) {
    const auto& p = j.at("payloads");
    if (!p.is_array()) fail("world.payloads", "expected an array");
    for (std::size_t i = 0; i < p.size(); ++i) {
      w.payloads.push_back(parse_payload(p[i], "world.payloads[" + std::to_string(i) + "]"));
    }
  }
}

}  // namespace

JointVector named_posture(const json& value, const PostureConfig& posture) {
  if (value.is_string()) {
    const auto name = value.get<std::string>();
    if (name == "vehicle") return posture.vehicle;
    if (name == "arm_ready") return posture.arm_ready;
    if (name == "tool_open") return posture.tool.open_pose;
    if (name == "tool_closed") return posture.tool.closed_pose;
    throw ConfigError("unknown posture '" + name + "'");
  }
  const VecX q = vecx(value, "joints");
  if (q.size() != 6) throw ConfigError("joints: expected 6 angles or a posture name");
  return q;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &doc;
  std::istringstream in(path);
  std::string key;
  std::vector<std::string> keys;
  while (std::getline(in, key, '.')) {
    if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty path segment");
    keys.push_back(key);
  }
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const std::string& k = keys[i];
    const bool last = i + 1 == keys.size();
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(k);
      } catch (const std::exception&) {
        throw ConfigError("override '" + assignment + "': '" + k + "' is not an array index");
      }
      if (idx >= node->size()) throw ConfigError("override '" + assignment + "': index out of range");
      node = &(*node)[idx];
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object()) throw ConfigError("override '" + assignment + "': '" + k + "' is not inside an object");
      node = &(*node)[k];
    }
    if (last) *node = value;
  }
}

std::string config_hash(const json& doc) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : doc.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Scenario parse_scenario(const json& doc) {
  only_keys(doc, {"name", "description", "duration", "log_period", "control", "robot", "world",
                  "initial", "events", "assertions"},
            "scenario");
  Scenario s;
  s.source = doc;
  s.config_hash = config_hash(doc);
  if (!doc.contains("name")) fail("scenario", "needs 'name'");
  s.name = text(doc.at("name"), "name");
  if (s.name.empty() || s.name.find_first_of(" ,\n") != std::string::npos) {
    fail("name", "must be non-empty without spaces or commas");
  }
  if (!doc.contains("duration")) fail("scenario", "needs 'duration'");
  s.duration = number(doc.at("duration"), "duration");
  if (!(s.duration > 0.0)) fail("duration", "must be positive");
  s.log_period = number_or(doc, "log_period", s.log_period, "scenario");
  if (!(s.log_period > 0.0)) fail("log_period", "must be positive");

  if (doc.contains("robot")) parse_robot(doc.at("robot"), s.robot);
  s.control.posture = PostureConfig::defaults(s.robot.legs);
  if (doc.contains("control")) parse_control(doc.at("control"), s.control);
  s.world.terrain = {flat_ground()};
  if (doc.contains("world")) parse_world(doc.at("world"), s.world);
  s.robot.validate();
  s.world.validate();
  s.control.validate();
  if (s.log_period < s.control.physics_dt) fail("log_period", "must not be shorter than physics_dt");

  const json initial = doc.value("initial", json::object());
  only_keys(initial, {"position", "orientation", "rpy", "linear_velocity", "angular_velocity",
                      "joints", "mode", "wires", "pretension", "tool_attached"},
            "initial");
  BodyState body;
  if (initial.contains("position")) body.position = vec3(initial.at("position"), "initial.position");
  if (initial.contains("orientation") && initial.contains("rpy")) {
    fail("initial", "give either 'orientation' or 'rpy', not both");
  }
  if (initial.contains("orientation")) {
    const auto& q = initial.at("orientation");
    if (!q.is_array() || q.size() != 4) fail("initial.orientation", "expected [w, x, y, z]");
    Quat quat(number(q[0], "initial.orientation"), number(q[1], "initial.orientation"),
              number(q[2], "initial.orientation"), number(q[3], "initial.orientation"));
    if (!(quat.norm() > 0.0)) fail("initial.orientation", "zero quaternion");
    body.orientation = quat.normalized();
  }
  if (initial.contains("rpy")) {
    const Vec3 rpy = vec3(initial.at("rpy"), "initial.rpy");
    body.orientation = Quat(Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) *
                            Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
                            Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()));
  }
  if (initial.contains("linear_velocity")) {
    body.linear_velocity = vec3(initial.at("linear_velocity"), "initial.linear_velocity");
  }
  if (initial.contains("angular_velocity")) {
    body.angular_velocity = vec3(initial.at("angular_velocity"), "initial.angular_velocity");
  }
  LegJointState legs;
  try {
    legs.set_joints(named_posture(initial.value("joints", json("vehicle")), s.control.posture));
  } catch (const ConfigError& e) {
    fail("initial", e.what());
  }
  if (initial.contains("mode")) s.initial_mode = parse_mode(initial.at("mode"), "initial.mode");
  if (!s.initial_mode.valid()) fail("initial.mode", "arm modes require CogVelocity");

  SimState state = make_state(body, legs, s.world, s.robot);
  if (initial.value("tool_attached", false)) state.tool_attached = true;
  if (initial.contains("wires")) {
    const auto& wires = initial.at("wires");
    if (!wires.is_array()) fail("initial.wires", "expected an array");
    for (std::size_t i = 0; i < wires.size(); ++i) {
      const std::string where = "initial.wires[" + std::to_string(i) + "]";
      only_keys(wires[i], {"wire", "anchor"}, where);
      if (!wires[i].contains("anchor")) fail(where, "needs 'anchor'");
      try {
        state = attach_wire(state, wire_slot(wires[i], where), vec3(wires[i].at("anchor"), where + ".anchor"),
                            s.robot);
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        fail(where, e.what());
      }
    }
  }
  if (state.tool_attached) {
    // Keep the whole assembly at rest: the velocity state is per unit of the
    // new mass distribution.
    state.angular_momentum = world_inertia(state, s.robot) * state.body.angular_velocity;
  }
  if (initial.value("pretension", true) && state.attached_count() > 0) {
    const auto idx = state.attached_indices();
    const WireJacobian jac = build_jacobian(state.body, state.attached_geometry(s.robot));
    TensionLimits lim;
    lim.f_min.resize(jac.wire_count());
    lim.f_max.resize(jac.wire_count());
    for (std::size_t j = 0; j < idx.size(); ++j) {
      lim.f_min(static_cast<Eigen::Index>(j)) = s.robot.limits.f_min(idx[j]);
      lim.f_max(static_cast<Eigen::Index>(j)) = s.robot.limits.f_max(idx[j]);
    }
    QpOptions opt;
    opt.regularization = s.control.regularization;
    const TensionSolution qp =
        solve_tension_qp(jac, gravity_wrench(moving_mass(state, s.robot), s.world.gravity), lim, opt);
    state = pretension_wires(state, qp.tensions, s.robot);
  }
  s.initial = state;

  static const std::set<std::string> kEventTypes{
      "attach_wire", "detach_wire", "transition", "set_velocity", "set_wire_rates", "set_drive",
      "set_hip_pitch", "manip_target", "wheel_spin", "tool_phase", "attach_tool",
      "release_payload", "spawn_payload", "mark"};
  if (doc.contains("events")) {
    const auto& ev = doc.at("events");
    if (!ev.is_array()) fail("events", "expected an array");
    double last = 0.0;
    for (std::size_t i = 0; i < ev.size(); ++i) {
      const std::string where = "events[" + std::to_string(i) + "]";
      if (!ev[i].is_object() || !ev[i].contains("t") || !ev[i].contains("type")) {
        fail(where, "needs 't' and 'type'");
      }
      ScenarioEvent e;
      e.time = number(ev[i].at("t"), where + ".t");
      e.type = text(ev[i].at("type"), where + ".type");
      if (!kEventTypes.count(e.type)) fail(where, "unknown event type '" + e.type + "'");
      if (e.time < 0.0 || e.time > s.duration) fail(where, "time outside [0, duration]");
      if (e.time < last) fail(where, "events must be time-ordered");
      last = e.time;
      e.args = ev[i];
      e.args.erase("t");
      e.args.erase("type");
      s.events.push_back(std::move(e));
    }
  }
  if (doc.contains("assertions")) {
    const auto& a = doc.at("assertions");
    if (!a.is_array()) fail("assertions", "expected an array");
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_object() || !a[i].contains("type")) {
        fail("assertions[" + std::to_string(i) + "]", "needs 'type'");
      }
      s.assertions.push_back(a[i]);
    }
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open scenario " + path.string());
  json doc = json::parse(f, nullptr, false, true);
  if (doc.is_discarded()) throw ConfigError("scenario " + path.string() + " is not valid JSON");
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_scenario(doc);
}

std::string apply_event(Runtime& rt, const std::string& type, const json& args) {
  const std::string where = "event " + type;
  std::ostringstream out;
  out << type;
  try {
    if (type == "attach_wire") {
      const int w = wire_slot(args, where);
      if (!args.contains("anchor")) fail(where, "needs 'anchor'");
      rt.attach_wire(w, vec3(args.at("anchor"), where + ".anchor"));
      out << ' ' << w + 1;
    } else if (type == "detach_wire") {
      const int w = wire_slot(args, where);
      rt.detach_wire(w);
      out << ' ' << w + 1;
    } else if (type == "transition") {
      TransitionRequest req;
      req.requested = rt.mode();
      const SystemMode m = parse_mode(args.contains("mode") ? args.at("mode") : args.value("to", json::object()), where);
      if (args.contains("mode") || args.contains("to")) {
        req.requested = m;
        const auto& spec = args.contains("mode") ? args.at("mode") : args.at("to");
        if (!spec.contains("wire")) req.requested.wire = rt.mode().wire;
        if (!spec.contains("leg")) req.requested.leg = rt.mode().leg;
      } else {
        fail(where, "needs 'mode'");
      }
      req.source = TransitionSource::Scenario;
      const TransitionResult r = rt.request_transition(req);
      out << ' ' << to_string(req.requested.wire) << '+' << to_string(req.requested.leg);
      if (r.accepted) {
        out << " accepted";
      } else {
        out << " rejected " << to_string(*r.reason);
        rt.take_notes();
      }
    } else if (type == "set_velocity") {
      Vec6 tw = Vec6::Zero();
      if (args.contains("twist")) {
        const VecX v = vecx(args.at("twist"), where + ".twist");
        if (v.size() != 6) fail(where, "twist needs 6 values");
        tw = v;
      } else {
        if (args.contains("linear")) tw.head<3>() = vec3(args.at("linear"), where + ".linear");
        if (args.contains("angular")) tw.tail<3>() = vec3(args.at("angular"), where + ".angular");
      }
      rt.set_cog_velocity(tw);
    } else if (type == "set_wire_rates") {
      if (!args.contains("rates")) fail(where, "needs 'rates'");
      rt.set_wire_rates(vecx(args.at("rates"), where + ".rates"));
    } else if (type == "set_drive") {
      rt.set_drive(number_or(args, "forward", 0.0, where), number_or(args, "yaw_rate", 0.0, where));
    } else if (type == "set_hip_pitch") {
      rt.set_hip_pitch_offset(number_or(args, "offset", 0.0, where));
    } else if (type == "manip_target") {
      ManipTarget t;
      if (!args.contains("target")) fail(where, "needs 'target'");
      const auto& p = args.at("target");
      if (!p.is_array() || p.size() < 2 || p.size() > 3) fail(where, "target needs [x, y] or [x, y, z]");
      t.p_target = Vec3(number(p[0], where), number(p[1], where), p.size() == 3 ? number(p[2], where) : 0.0);
      t.width = number_or(args, "width", 0.0, where);
      t.wheel_spin = number_or(args, "wheel_spin", t.wheel_spin, where);
      rt.set_manip_target(t);
    } else if (type == "wheel_spin") {
      rt.set_wheel_spin(number_or(args, "value", 0.0, where));
    } else if (type == "tool_phase") {
      if (!args.contains("phase")) fail(where, "needs 'phase'");
      const ToolPhase ph = tool_phase_from_string(text(args.at("phase"), where + ".phase"));
      rt.set_tool_phase(ph);
      out << ' ' << to_string(ph);
    } else if (type == "attach_tool") {
      rt.attach_tool();
    } else if (type == "release_payload") {
      rt.release_payloads();
    } else if (type == "spawn_payload") {
      rt.spawn_payload(parse_payload(args, where));
    } else if (type == "mark") {
      out << ' ' << args.value("label", std::string{});
    } else {
      fail(where, "unknown event type");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    out << " error " << e.what();
  }
  return out.str();
}

bool RunResult::passed() const {
  return std::all_of(assertions.begin(), assertions.end(), [](const auto& a) { return a.passed; });
}

namespace {

struct Window {
  double from = -1e300;
  double to = 1e300;
  bool contains(double t) const { return t >= from - 1e-12 && t <= to + 1e-12; }
};

Window window_of(const json& a) {
  Window w;
  if (a.contains("window")) {
    const auto& v = a.at("window");
    if (!v.is_array() || v.size() != 2) throw ConfigError("assertion window must be [t0, t1]");
    w.from = number(v[0], "window");
    w.to = number(v[1], "window");
  }
  return w;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

AssertionOutcome check(const Scenario& scenario, const RunLog& log, const json& a) {
  AssertionOutcome out;
  const std::string type = a.at("type").get<std::string>();
  out.name = a.value("name", type + (a.contains("column") ? ":" + a.at("column").get<std::string>() : ""));
  const Window win = window_of(a);
  const std::size_t tc = log.column("t");
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < log.rows.size(); ++i) {
    if (win.contains(log.rows[i][tc])) rows.push_back(i);
  }
  auto col = [&](const char* key) { return log.column(a.at(key).get<std::string>()); };
  if (rows.empty() && type != "event_logged") {
    out.detail = "no rows in window";
    return out;
  }

  if (type == "max_drift") {
    const double limit = number(a.at("max"), out.name);
    const std::size_t x = log.column("x");
    const auto& r0 = log.rows[rows.front()];
    double worst = 0.0;
    for (std::size_t i : rows) {
      const auto& r = log.rows[i];
      worst = std::max(worst, std::hypot(r[x] - r0[x], r[x + 1] - r0[x + 1], r[x + 2] - r0[x + 2]));
    }
    out.passed = worst < limit;
    out.detail = "max drift " + fmt(worst) + " m, limit " + fmt(limit);
  } else if (type == "bounds") {
    const std::size_t c = col("column");
    const double lo = a.contains("min") ? number(a.at("min"), out.name) : -1e300;
    const double hi = a.contains("max") ? number(a.at("max"), out.name) : 1e300;
    const bool strict = a.value("strict", false);
    double mn = 1e300, mx = -1e300;
    for (std::size_t i : rows) {
      mn = std::min(mn, log.rows[i][c]);
      mx = std::max(mx, log.rows[i][c]);
    }
    out.passed = strict ? (mn > lo && mx < hi) : (mn >= lo && mx <= hi);
    out.detail = "range [" + fmt(mn) + ", " + fmt(mx) + "]";
  } else if (type == "monotone") {
    const std::size_t c = col("column");
    const std::string dir = a.value("direction", std::string("nonincreasing"));
    if (dir != "nonincreasing" && dir != "nondecreasing") throw ConfigError(out.name + ": bad direction");
    const double tol = a.value("tol", 0.0);
    const double sign = dir == "nonincreasing" ? 1.0 : -1.0;
    double worst = 0.0;
    for (std::size_t k = 1; k < rows.size(); ++k) {
      worst = std::max(worst, sign * (log.rows[rows[k]][c] - log.rows[rows[k - 1]][c]));
    }
    out.passed = worst <= tol;
    out.detail = "largest step against " + dir + ": " + fmt(worst);
  } else if (type == "delta") {
    const std::size_t c = col("column");
    const double expected = number(a.at("expected"), out.name);
    const double tol = a.contains("rel_tol") ? std::abs(expected) * number(a.at("rel_tol"), out.name)
                                             : number(a.value("abs_tol", json(0.0)), out.name);
    const double d = log.rows[rows.back()][c] - log.rows[rows.front()][c];
    out.passed = std::abs(d - expected) <= tol;
    out.detail = "change " + fmt(d) + ", expected " + fmt(expected) + " +- " + fmt(tol);
  } else if (type == "tensions_nonnegative") {
    double mn = 1e300;
    for (int w = 1; w <= kAnchorWires; ++w) {
      const std::size_t c = log.column("f" + std::to_string(w));
      for (std::size_t i : rows) mn = std::min(mn, log.rows[i][c]);
    }
    out.passed = mn >= 0.0;
    out.detail = "min tension " + fmt(mn) + " N";
  } else if (type == "final_joint_error") {
    const JointVector want = named_posture(a.at("expected"), scenario.control.posture);
    const double limit = number(a.at("max"), out.name);
    const std::size_t q0 = log.column("q_l_roll");
    double worst = 0.0;
    for (int j = 0; j < 6; ++j) worst = std::max(worst, std::abs(log.rows[rows.back()][q0 + j] - want(j)));
    out.passed = worst < limit;
    out.detail = "final joint error " + fmt(worst) + " rad";
  } else if (type == "rms_below") {
    const std::size_t c = col("column");
    const std::size_t r = col("reference");
    const double limit = number(a.at("max"), out.name);
    double acc = 0.0;
    for (std::size_t i : rows) acc += std::pow(log.rows[i][c] - log.rows[i][r], 2);
    const double rms = std::sqrt(acc / static_cast<double>(rows.size()));
    out.passed = rms < limit;
    out.detail = "rms " + fmt(rms);
  } else if (type == "event_logged") {
    const std::string needle = text(a.at("contains"), out.name);
    const bool expect = a.value("expect", true);
    bool found = false;
    for (std::size_t i = 0; i < log.rows.size(); ++i) {
      if (win.contains(log.rows[i][tc]) && log.events[i].find(needle) != std::string::npos) found = true;
    }
    out.passed = found == expect;
    out.detail = std::string(found ? "found" : "not found") + " '" + needle + "'";
  } else if (type == "contacts_on_patch") {
    const int patch = a.at("patch").get<int>();
    const double threshold = a.value("threshold", scenario.robot.contact.contact_threshold);
    const std::size_t fn = log.column("fn_lw");
    const std::size_t pc = log.column("patch_lw");
    int active = 0, off = 0;
    for (std::size_t i : rows) {
      for (int k = 0; k < kContactCount; ++k) {
        if (log.rows[i][fn + k] <= threshold) continue;
        ++active;
        if (static_cast<int>(log.rows[i][pc + k]) != patch) ++off;
      }
    }
    const std::size_t bf = log.column("body_force");
    double body = 0.0;
    for (std::size_t i : rows) body = std::max(body, log.rows[i][bf]);
    const bool allow_body = a.value("allow_body", false);
    out.passed = active > 0 && off == 0 && (allow_body || body <= threshold);
    out.detail = std::to_string(active) + " contact samples, " + std::to_string(off) +
                 " off patch, max body force " + fmt(body) + " N";
  } else if (type == "mode_at") {
    const SystemMode m = parse_mode(a.at("mode"), out.name);
    const std::size_t wc = log.column("wire_mode");
    const auto& r = log.rows[rows.back()];
    out.passed = static_cast<int>(r[wc]) == static_cast<int>(m.wire) &&
                 static_cast<int>(r[wc + 1]) == static_cast<int>(m.leg);
    out.detail = "mode codes " + fmt(r[wc]) + "/" + fmt(r[wc + 1]);
  } else {
    throw ConfigError("unknown assertion type '" + type + "'");
  }
  return out;
}

}  // namespace

std::vector<AssertionOutcome> evaluate_assertions(const Scenario& scenario, const RunLog& log) {
  std::vector<AssertionOutcome> out;
  for (const auto& a : scenario.assertions) {
    try {
      out.push_back(check(scenario, log, a));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("assertion " + a.dump() + ": " + e.what());
    } catch (const MissingColumn& e) {
      throw ConfigError("assertion " + a.dump() + ": " + e.what());
    }
  }
  return out;
}

RunResult run_scenario(const Scenario& scenario) {
  Runtime rt(scenario.world, scenario.robot, scenario.control, scenario.initial, scenario.initial_mode);
  const double dt = scenario.control.physics_dt;
  const long steps = std::max(1L, std::lround(scenario.duration / dt));
  const long per_row = std::max(1L, std::lround(scenario.log_period / dt));

  RunResult result;
  result.log.scenario = scenario.name;
  result.log.config_hash = scenario.config_hash;
  result.log.columns = runlog_columns();

  std::size_t next_event = 0;
  std::string pending;
  int event_errors = 0, rejected = 0, qp_failures = 0;
  double min_tension = 1e300, max_tension = 0.0;
  auto note = [&](const std::string& s) {
    if (!pending.empty()) pending += "; ";
    pending += s;
  };
  // The last pass only applies events due at the end and logs the final row.
  for (long k = 0; k <= steps; ++k) {
    if (rt.on_tick_boundary()) {
      const double t = rt.state().time;
      while (next_event < scenario.events.size() && scenario.events[next_event].time <= t + 1e-9) {
        const auto& ev = scenario.events[next_event++];
        const std::string msg = apply_event(rt, ev.type, ev.args);
        if (msg.find(" error ") != std::string::npos) ++event_errors;
        if (msg.find(" rejected ") != std::string::npos) ++rejected;
        note(msg);
      }
    }
    rt.update_controls();
    for (const auto& n : rt.take_notes()) note(n);
    if (rt.on_tick_boundary() && !rt.record().qp_converged) ++qp_failures;
    for (const auto& w : rt.state().wires) {
      if (!w.attached) continue;
      min_tension = std::min(min_tension, w.tension);
      max_tension = std::max(max_tension, w.tension);
    }
    if (k % per_row == 0) {
      result.log.rows.push_back(log_row(rt));
      result.log.events.push_back(pending);
      pending.clear();
    }
    if (k < steps) rt.step_once();
  }
  result.assertions = evaluate_assertions(scenario, result.log);

  const SimState& s = rt.state();
  json assertions = json::array();
  for (const auto& a : result.assertions) {
    assertions.push_back({{"name", a.name}, {"passed", a.passed}, {"detail", a.detail}});
  }
  const Vec3 p0 = scenario.initial.body.position;
  result.metrics = {
      {"scenario", scenario.name},
      {"config_hash", scenario.config_hash},
      {"schema", kRunLogSchema},
      {"duration", scenario.duration},
      {"steps", steps},
      {"rows", result.log.rows.size()},
      {"final_position", {s.body.position.x(), s.body.position.y(), s.body.position.z()}},
      {"displacement", (s.body.position - p0).norm()},
      {"min_wire_tension", min_tension == 1e300 ? json(nullptr) : json(min_tension)},
      {"max_wire_tension", max_tension},
      {"event_errors", event_errors},
      {"rejected_transitions", rejected},
      {"qp_nonconverged_ticks", qp_failures},
      {"assertions", assertions},
      {"passed", result.passed()},
  };
  return result;
}

}  // namespace cablebot
