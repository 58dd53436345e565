#include "cablebot/errors.hpp"
#include "cablebot/run_log.hpp"
#include "cablebot/scenario.hpp"
#include "cablebot/teleop_server.hpp"
#include "cablebot/wire_controller.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;
using namespace cablebot;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kAssertion = 3, kDivergence = 4 };

volatile std::sig_atomic_t g_stop = 0;
extern "C" void on_signal(int) { g_stop = 1; }

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("cablebot");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("CABLEBOT_LOG_LEVEL")) {
    spdlog::set_level(spdlog::level::from_str(level));
  }
}

fs::path resolve_scenario(const std::string& name) {
  if (fs::exists(name)) return name;
  const char* env = std::getenv("CABLEBOT_SCENARIO_DIR");
  const fs::path dir = env ? fs::path(env) : fs::path(CABLEBOT_SCENARIO_DIR);
  for (const fs::path& p : {dir / name, dir / (name + ".json")}) {
    if (fs::exists(p)) return p;
  }
  throw ConfigError("no scenario file or bundled scenario named '" + name + "'");
}

int cmd_run(const std::string& script, const std::vector<std::string>& overrides, const fs::path& out) {
  const Scenario scenario = load_scenario(resolve_scenario(script), overrides);
  spdlog::info("running {} ({} s, config {})", scenario.name, scenario.duration, scenario.config_hash);
  fs::create_directories(out);
  const auto t0 = std::chrono::steady_clock::now();
  RunResult result;
  try {
    result = run_scenario(scenario);
  } catch (const NumericalDivergence& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kDivergence;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const fs::path log_path = out / (scenario.name + ".csv");
  result.log.write(log_path);
  std::ofstream(out / (scenario.name + ".metrics.json")) << result.metrics.dump(2) << '\n';
  std::cout << scenario.name << ": " << result.log.rows.size() << " rows in " << wall << " s -> "
            << log_path.string() << '\n';
  for (const auto& a : result.assertions) {
    std::cout << (a.passed ? "  ok   " : "  FAIL ") << a.name << "  " << a.detail << '\n';
  }
  return result.passed() ? kOk : kAssertion;
}

int cmd_plots(const fs::path& log_path, fs::path out) {
  const RunLog log = RunLog::read(log_path);
  if (out.empty()) out = log_path.parent_path() / (log_path.stem().string() + "_plots");
  for (const auto& p : emit_plots(log, out)) std::cout << p.string() << '\n';
  return kOk;
}

int cmd_serve(int port, const std::string& scenario_name, const std::string& host, double rtf) {
  const Scenario s = load_scenario(resolve_scenario(scenario_name));
  Runtime rt(s.world, s.robot, s.control, s.initial, s.initial_mode);
  ServeOptions opt;
  opt.port = port;
  opt.host = host;
  opt.real_time_factor = rtf;
  TeleopServer server(std::move(rt), opt);
  struct sigaction sa {};
  sa.sa_handler = on_signal;
  sigaction(SIGINT, &sa, nullptr);
  sigaction(SIGTERM, &sa, nullptr);
  server.start();
  std::cout << "listening on " << host << ':' << server.port() << std::endl;
  while (!g_stop && server.running()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server.stop();
  return kOk;
}

VecX to_vec(const std::vector<double>& v) { return Eigen::Map<const VecX>(v.data(), static_cast<Eigen::Index>(v.size())); }

int cmd_identify(const std::vector<double>& up, const std::vector<double>& down,
                 const std::vector<double>& i0, double mass, double g, double radius) {
  if (up.size() != down.size() || up.size() != i0.size()) {
    throw ConfigError("--i-up, --i-down and --i0 need the same number of values");
  }
  const WinchModel w = identify_winch(to_vec(up), to_vec(down), to_vec(i0), mass, g, radius);
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    out.push_back({{"kt", w.torque_constants(k)}, {"i0", w.coulomb_current(k)}, {"il", w.load_friction(k)}});
  }
  std::cout << nlohmann::json({{"radius", radius}, {"winches", out}}).dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Simulator and controllers for a wire-suspended wheeled-legged robot"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a scenario script and write its log and metrics");
  std::string script;
  std::vector<std::string> overrides;
  std::string out_dir = "out";
  run->add_option("script", script, "Scenario file or bundled scenario name")->required();
  run->add_option("--config", overrides, "Override a scenario value, dotted.path=value")->take_all();
  run->add_option("--out", out_dir, "Output directory");

  auto* plots = app.add_subcommand("plots", "Split a run log into per-panel series files");
  std::string log_path;
  std::string plot_dir;
  plots->add_option("log", log_path, "Run log CSV")->required();
  plots->add_option("--out", plot_dir, "Output directory (default <log>_plots)");

  auto* serve = app.add_subcommand("serve", "Run a scenario in real time behind the teleop socket");
  int port = 8765;
  std::string serve_scenario = "hover";
  std::string host = "127.0.0.1";
  double rtf = 1.0;
  serve->add_option("--port", port, "TCP port, 0 for any");
  serve->add_option("--scenario", serve_scenario, "Initial scenario");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--rtf", rtf, "Real-time factor");

  auto* identify = app.add_subcommand("identify", "Identify winch constants from threshold currents");
  std::vector<double> i_up, i_down, i_zero;
  double mass = RobotParams{}.total_mass();
  double g = 9.81;
  double radius = WinchModel{}.radius;
  identify->add_option("--i-up", i_up, "Current that starts the robot rising, A")->required();
  identify->add_option("--i-down", i_down, "Current below which the robot descends, A")->required();
  identify->add_option("--i0", i_zero, "Current that starts unloaded winding, A")->required();
  identify->add_option("--mass", mass, "Suspended mass, kg");
  identify->add_option("--g", g, "Gravity, m/s^2");
  identify->add_option("--radius", radius, "Drum radius, m");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*run) return cmd_run(script, overrides, out_dir);
    if (*plots) return cmd_plots(log_path, plot_dir);
    if (*serve) return cmd_serve(port, serve_scenario, host, rtf);
    if (*identify) return cmd_identify(i_up, i_down, i_zero, mass, g, radius);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const MissingColumn& e) {
    std::cerr << "missing column: " << e.what() << '\n';
    return kConfig;
  } catch (const NegativeFriction& e) {
    std::cerr << "identification failed: " << e.what() << '\n';
    return kConfig;
  } catch (const NumericalDivergence& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kDivergence;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
