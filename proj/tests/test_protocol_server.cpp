#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cablebot/errors.hpp"
#include "cablebot/protocol.hpp"
#include "cablebot/scenario.hpp"
#include "cablebot/teleop_server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <optional>

using namespace cablebot;
using nlohmann::json;

namespace {

Runtime hover_runtime() {
  const Scenario s = load_scenario(std::filesystem::path(CABLEBOT_SCENARIO_DIR) / "hover.json");
  return Runtime(s.world, s.robot, s.control, s.initial, s.initial_mode);
}

// Blocking line client with a deadline on every read.
class Client {
 public:
  explicit Client(int port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    connected_ = ::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0;
  }
  ~Client() { ::close(fd_); }
  bool connected() const { return connected_; }

  void send(const std::string& line) {
    const std::string framed = line + "\n";
    [[maybe_unused]] auto n = ::send(fd_, framed.data(), framed.size(), MSG_NOSIGNAL);
  }

  std::optional<json> next(int timeout_ms = 3000) {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    for (;;) {
      const auto pos = buf_.find('\n');
      if (pos != std::string::npos) {
        const std::string line = buf_.substr(0, pos);
        buf_.erase(0, pos + 1);
        return json::parse(line);
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return std::nullopt;
      pollfd p{fd_, POLLIN, 0};
      if (::poll(&p, 1, static_cast<int>(left.count())) <= 0) return std::nullopt;
      char tmp[4096];
      const ssize_t n = ::recv(fd_, tmp, sizeof tmp, 0);
      if (n <= 0) return std::nullopt;
      buf_.append(tmp, static_cast<std::size_t>(n));
    }
  }

  // Skips state frames until one of another type arrives.
  std::optional<json> reply() {
    for (int k = 0; k < 1000; ++k) {
      auto f = next();
      if (!f || f->at("type") != "state") return f;
    }
    return std::nullopt;
  }

 private:
  int fd_ = -1;
  bool connected_ = false;
  std::string buf_;
};

template <class Pred>
bool eventually(Pred pred, int timeout_ms = 3000) {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  while (std::chrono::steady_clock::now() < deadline) {
    if (pred()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  return pred();
}

}  // namespace

TEST_CASE("command parsing") {
  const auto c = protocol::parse_command(R"({"type":"set_velocity","linear":[0,0,0.1],"id":7})");
  CHECK(c.type == "set_velocity");
  CHECK(c.id == 7);
  CHECK_FALSE(c.args.contains("type"));
  CHECK(protocol::parse_command(R"({"type":"transition","mode":{"leg":"Manipulation"}})").type == "transition");
  CHECK(protocol::parse_command(R"({"type":"attach_wire","wire":3,"anchor":[1,2,3]})").args["wire"] == 3);

  for (const char* bad : {"not json", "[1,2]", R"({"linear":[0,0,0]})", R"({"type":"warp"})",
                          R"({"type":"set_velocity","linear":[0,0]})",
                          R"({"type":"set_velocity","speed":1})",
                          R"({"type":"set_wire_rates","rates":[]})",
                          R"({"type":"set_wire_rates","rates":[1,2,3,4,5]})",
                          R"({"type":"transition","mode":{"wire":"Hover"}})",
                          R"({"type":"transition"})",
                          R"({"type":"tool_phase","phase":"Spin"})",
                          R"({"type":"attach_wire","wire":0,"anchor":[1,2,3]})",
                          R"({"type":"attach_wire","wire":1,"anchor":[1,2]})"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(protocol::parse_command(bad), ConfigError);
  }
}

TEST_CASE("command replies") {
  Runtime rt = hover_runtime();
  json r = protocol::apply_command(rt, protocol::parse_command(R"({"type":"set_velocity","linear":[0,0,0.1],"id":"a"})"), 3);
  CHECK(r["type"] == "ack");
  CHECK(r["id"] == "a");
  CHECK(r["tick"] == 3);

  r = protocol::apply_command(rt, protocol::parse_command(R"({"type":"transition","mode":{"wire":"Free","leg":"Manipulation"}})"), 4);
  CHECK(r["type"] == "rejected");
  CHECK(r["reason"] == "InvalidCombination");

  r = protocol::apply_command(rt, protocol::parse_command(R"({"type":"attach_wire","wire":1,"anchor":[0,0,3]})"), 5);
  CHECK(r["type"] == "error");

  r = protocol::apply_command(rt, protocol::parse_command(R"({"type":"set_wire_rates","rates":[0.1,0.1]})"), 6);
  CHECK(r["type"] == "error");

  const json frame = protocol::state_frame(rt, 9);
  CHECK(frame["type"] == "state");
  CHECK(frame["v"] == protocol::kVersion);
  CHECK(frame["wires"].size() == 4);
  CHECK(frame["pose"]["orientation"].size() == 4);
  CHECK(frame["mode"]["wire"] == "CogVelocity");
}

TEST_CASE("a command takes effect within two control ticks") {
  Runtime with = hover_runtime();
  Runtime without = hover_runtime();
  const auto cmd = protocol::parse_command(R"({"type":"set_velocity","linear":[0,0,0.2]})");
  REQUIRE(protocol::apply_command(with, cmd, 0)["type"] == "ack");
  with.run_tick();
  without.run_tick();
  CHECK(with.state().body.position == without.state().body.position);
  with.run_tick();
  without.run_tick();
  CHECK(with.state().body.position.z() > without.state().body.position.z());
}

TEST_CASE("loopback server") {
  ServeOptions opt;
  opt.real_time_factor = 2.0;
  TeleopServer server(hover_runtime(), opt);
  server.start();
  REQUIRE(server.running());
  REQUIRE(server.port() > 0);

  Client a(server.port());
  Client b(server.port());
  REQUIRE(a.connected());
  REQUIRE(b.connected());
  REQUIRE(eventually([&] { return server.client_count() == 2; }));

  SUBCASE("viewers receive the same frames") {
    auto fa = a.next();
    REQUIRE(fa);
    // Align b on a's first complete frame.
    std::optional<json> fb;
    for (int k = 0; k < 200; ++k) {
      fb = b.next();
      REQUIRE(fb);
      if ((*fb)["tick"] == (*fa)["tick"]) break;
    }
    CHECK(*fa == *fb);
    for (int k = 0; k < 10; ++k) {
      fa = a.next();
      fb = b.next();
      REQUIRE(fa);
      REQUIRE(fb);
      CHECK(*fa == *fb);
    }
  }

  SUBCASE("malformed frames get an error frame and the server keeps going") {
    a.send("{oops");
    auto r = a.reply();
    REQUIRE(r);
    CHECK((*r)["type"] == "error");
    a.send(R"({"type":"set_velocity","linear":[0,0,0.1],"id":42})");
    r = a.reply();
    REQUIRE(r);
    CHECK((*r)["type"] == "ack");
    CHECK((*r)["id"] == 42);
    const long acked = (*r)["tick"].get<long>();
    auto f = a.next();
    REQUIRE(f);
    CHECK((*f)["type"] == "state");
    CHECK((*f)["tick"].get<long>() <= acked + 2);
    CHECK(server.running());
  }

  SUBCASE("rejections name the guard") {
    b.send(R"({"type":"transition","mode":{"wire":"Free","leg":"ToolUtilization"}})");
    auto r = b.reply();
    REQUIRE(r);
    CHECK((*r)["type"] == "rejected");
    CHECK((*r)["reason"] == "InvalidCombination");
  }

  server.stop();
  CHECK_FALSE(server.running());
  server.stop();
}

TEST_CASE("a taken port is a bind error") {
  TeleopServer first(hover_runtime());
  first.start();
  ServeOptions opt;
  opt.port = first.port();
  TeleopServer second(hover_runtime(), opt);
  CHECK_THROWS_AS(second.start(), BindError);
  CHECK_FALSE(second.running());
  ServeOptions bad_host;
  bad_host.host = "not-an-address";
  TeleopServer third(hover_runtime(), bad_host);
  CHECK_THROWS_AS(third.start(), BindError);
  first.stop();
}

TEST_CASE("server options are validated") {
  ServeOptions opt;
  opt.real_time_factor = 0.0;
  CHECK_THROWS_AS(TeleopServer(hover_runtime(), opt), ConfigError);
}
