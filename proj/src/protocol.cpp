#include "cablebot/protocol.hpp"

#include "cablebot/errors.hpp"
#include "cablebot/scenario.hpp"

#include <set>

namespace cablebot::protocol {

using nlohmann::json;

json state_frame(const Runtime& rt, long tick) {
  const SimState& s = rt.state();
  const auto& p = s.body.position;
  const auto& q = s.body.orientation;
  json wires = json::array();
  for (const auto& w : s.wires) {
    wires.push_back({{"attached", w.attached},
                     {"anchor", {w.anchor.x(), w.anchor.y(), w.anchor.z()}},
                     {"length", w.length},
                     {"tension", w.tension}});
  }
  json contacts = json::array();
  for (double f : s.contacts.normal_force) contacts.push_back(f > rt.params().contact.contact_threshold);
  const Vec6 tw = s.body.twist();
  return {{"type", "state"},
          {"v", kVersion},
          {"t", s.time},
          {"tick", tick},
          {"pose",
           {{"position", {p.x(), p.y(), p.z()}}, {"orientation", {q.w(), q.x(), q.y(), q.z()}}}},
          {"twist", {tw(0), tw(1), tw(2), tw(3), tw(4), tw(5)}},
          {"wires", wires},
          {"mode", {{"wire", to_string(rt.mode().wire)}, {"leg", to_string(rt.mode().leg)}}},
          {"contacts", contacts},
          {"posture_active", rt.posture_active()}};
}

json error_frame(const std::string& message, const json& id) {
  return {{"type", "error"}, {"message", message}, {"id", id}};
}

namespace {

void require_keys(const json& args, std::initializer_list<const char*> allowed,
                  std::initializer_list<const char*> required, const std::string& type) {
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : args.items()) {
    if (!ok.count(item.key())) throw ConfigError(type + ": unknown field '" + item.key() + "'");
  }
  for (const char* k : required) {
    if (!args.contains(k)) throw ConfigError(type + ": missing field '" + k + "'");
  }
}

bool numeric_array(const json& j, std::size_t min, std::size_t max) {
  if (!j.is_array() || j.size() < min || j.size() > max) return false;
  for (const auto& v : j) {
    if (!v.is_number()) return false;
  }
  return true;
}

}  // namespace

Command parse_command(const std::string& line) {
  const json frame = json::parse(line, nullptr, false);
  if (frame.is_discarded()) throw ConfigError("frame is not valid JSON");
  if (!frame.is_object()) throw ConfigError("frame must be a JSON object");
  if (!frame.contains("type") || !frame.at("type").is_string()) {
    throw ConfigError("frame needs a string 'type'");
  }
  Command cmd;
  cmd.type = frame.at("type").get<std::string>();
  cmd.id = frame.value("id", json(nullptr));
  cmd.args = frame;
  cmd.args.erase("type");
  cmd.args.erase("id");
  const json& a = cmd.args;
  if (cmd.type == "set_velocity") {
    require_keys(a, {"linear", "angular"}, {}, cmd.type);
    for (const char* k : {"linear", "angular"}) {
      if (a.contains(k) && !numeric_array(a.at(k), 3, 3)) {
        throw ConfigError(std::string("set_velocity: '") + k + "' must be 3 numbers");
      }
    }
  } else if (cmd.type == "set_wire_rates") {
    require_keys(a, {"rates"}, {"rates"}, cmd.type);
    if (!numeric_array(a.at("rates"), 1, kAnchorWires)) {
      throw ConfigError("set_wire_rates: 'rates' must be 1 to 4 numbers");
    }
  } else if (cmd.type == "transition") {
    require_keys(a, {"mode"}, {"mode"}, cmd.type);
    const json& m = a.at("mode");
    if (!m.is_object()) throw ConfigError("transition: 'mode' must be an object");
    require_keys(m, {"wire", "leg"}, {}, "transition.mode");
    if (m.contains("wire")) {
      if (!m.at("wire").is_string()) throw ConfigError("transition: 'wire' must be a string");
      wire_mode_from_string(m.at("wire").get<std::string>());
    }
    if (m.contains("leg")) {
      if (!m.at("leg").is_string()) throw ConfigError("transition: 'leg' must be a string");
      leg_mode_from_string(m.at("leg").get<std::string>());
    }
  } else if (cmd.type == "tool_phase") {
    require_keys(a, {"phase"}, {"phase"}, cmd.type);
    if (!a.at("phase").is_string()) throw ConfigError("tool_phase: 'phase' must be a string");
    tool_phase_from_string(a.at("phase").get<std::string>());
  } else if (cmd.type == "attach_wire") {
    require_keys(a, {"wire", "anchor"}, {"wire", "anchor"}, cmd.type);
    if (!a.at("wire").is_number_integer()) throw ConfigError("attach_wire: 'wire' must be an integer");
    const int w = a.at("wire").get<int>();
    if (w < 1 || w > kAnchorWires) throw ConfigError("attach_wire: 'wire' must be in 1..4");
    if (!numeric_array(a.at("anchor"), 3, 3)) throw ConfigError("attach_wire: 'anchor' must be 3 numbers");
  } else {
    throw ConfigError("unknown command type '" + cmd.type + "'");
  }
  return cmd;
}

json apply_command(Runtime& rt, const Command& cmd, long tick) {
  try {
    if (cmd.type == "set_wire_rates" && cmd.args.at("rates").size() != kAnchorWires &&
        static_cast<int>(cmd.args.at("rates").size()) != rt.state().attached_count()) {
      return error_frame("set_wire_rates: need 4 rates or one per attached wire", cmd.id);
    }
    if (cmd.type == "transition") {
      TransitionRequest req;
      req.requested = rt.mode();
      const json& m = cmd.args.at("mode");
      if (m.contains("wire")) req.requested.wire = wire_mode_from_string(m.at("wire").get<std::string>());
      if (m.contains("leg")) req.requested.leg = leg_mode_from_string(m.at("leg").get<std::string>());
      req.source = TransitionSource::Operator;
      const TransitionResult r = rt.request_transition(req);
      rt.take_notes();
      if (!r.accepted) {
        return {{"type", "rejected"}, {"command", cmd.type}, {"reason", to_string(*r.reason)},
                {"message", r.message}, {"tick", tick}, {"id", cmd.id}};
      }
    } else {
      const std::string msg = apply_event(rt, cmd.type, cmd.args);
      if (msg.find(" error ") != std::string::npos) {
        return error_frame(msg, cmd.id);
      }
    }
  } catch (const Error& e) {
    return error_frame(e.what(), cmd.id);
  }
  return {{"type", "ack"}, {"command", cmd.type}, {"tick", tick}, {"id", cmd.id}};
}

}  // namespace cablebot::protocol
