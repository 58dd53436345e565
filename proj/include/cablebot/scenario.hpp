#pragma once

#include "cablebot/run_log.hpp"
#include "cablebot/runtime.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace cablebot {

struct ScenarioEvent {
  double time = 0.0;
  std::string type;
  nlohmann::json args;
};

/// A parsed, validated scenario script with every config override applied.
struct Scenario {
  std::string name;
  double duration = 0.0;
  double log_period = 0.01;  ///< s between log rows
  WorldModel world;
  RobotParams robot;
  ControlConfig control;
  SimState initial;
  SystemMode initial_mode;
  std::vector<ScenarioEvent> events;
  std::vector<nlohmann::json> assertions;
  std::string config_hash;
  nlohmann::json source;  ///< the document after overrides
};

/// Applies one `dotted.path=value` override in place. The value is parsed as
/// JSON when possible and taken as a string otherwise. Throws ConfigError.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// FNV-1a 64 of the canonical dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

/// Throws ConfigError on any schema violation.
Scenario parse_scenario(const nlohmann::json& doc);
Scenario load_scenario(const std::filesystem::path& path,
                       const std::vector<std::string>& overrides = {});

struct AssertionOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RunResult {
  RunLog log;
  std::vector<AssertionOutcome> assertions;
  nlohmann::json metrics;

  bool passed() const;
};

/// Checks the scenario's assertions against a finished log.
std::vector<AssertionOutcome> evaluate_assertions(const Scenario& scenario, const RunLog& log);

/// Runs to completion as fast as possible. Throws NumericalDivergence.
RunResult run_scenario(const Scenario& scenario);

/// Applies one scripted or operator event to a runtime and describes the
/// outcome. Throws ConfigError on a malformed event.
std::string apply_event(Runtime& runtime, const std::string& type, const nlohmann::json& args);

/// Named joint postures accepted wherever a joint vector is expected.
JointVector named_posture(const nlohmann::json& value, const PostureConfig& posture);

}  // namespace cablebot
