#pragma once

#include "cablebot/runtime.hpp"

#include "json.hpp"

#include <string>

namespace cablebot {

/// Newline-delimited JSON frames shared by the teleop server and its clients.
namespace protocol {

inline constexpr int kVersion = 1;

/// Snapshot of the plant for viewers.
nlohmann::json state_frame(const Runtime& runtime, long tick);

/// A validated operator command: one of set_velocity, set_wire_rates,
/// transition, tool_phase, attach_wire.
struct Command {
  std::string type;
  nlohmann::json args;  ///< frame without "type" and "id"
  nlohmann::json id;    ///< echoed in the reply; null when absent
};

/// Parses and validates one line. Throws ConfigError with a client-facing
/// message; the runtime is never touched by a rejected line.
Command parse_command(const std::string& line);

/// Applies a command between control ticks and returns the reply frame:
/// "ack", or "rejected" with the guard reason, or "error".
nlohmann::json apply_command(Runtime& runtime, const Command& command, long tick);

nlohmann::json error_frame(const std::string& message, const nlohmann::json& id = nullptr);

}  // namespace protocol
}  // namespace cablebot
