#pragma once

#include "cablebot/runtime.hpp"

#include <atomic>
#include <cstddef>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace cablebot {

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 0;                      ///< 0 picks an ephemeral port
  double real_time_factor = 1.0;
  double frame_rate = 50.0;          ///< state frames per second
  std::size_t command_queue = 256;   ///< pending operator lines
  std::size_t client_buffer = 1 << 20;  ///< bytes queued per client before it is dropped
};

/// Runs a Runtime in real time and speaks newline-delimited JSON over TCP.
/// One simulation thread owns the runtime; one I/O thread multiplexes the
/// listener and all clients. Commands are applied between control ticks in
/// arrival order; every client receives the same state frames.
class TeleopServer {
 public:
  TeleopServer(Runtime runtime, ServeOptions options = {});
  ~TeleopServer();
  TeleopServer(const TeleopServer&) = delete;
  TeleopServer& operator=(const TeleopServer&) = delete;

  /// Binds and starts both threads. Throws BindError.
  void start();
  /// Idempotent; joins the threads and closes every socket.
  void stop();
  bool running() const { return running_; }
  int port() const { return port_; }
  long tick() const { return tick_; }
  std::size_t client_count() const;

 private:
  struct Client {
    int fd = -1;
    std::string inbox;
    std::string outbox;
  };
  struct Inbound {
    int client;
    std::string line;
  };

  void sim_loop();
  void io_loop();
  void send_to(int client, const std::string& line);
  void broadcast(const std::string& line);
  void wake_io();

  Runtime runtime_;
  ServeOptions options_;
  int listen_fd_ = -1;
  int wake_pipe_[2] = {-1, -1};
  int port_ = 0;
  std::atomic<bool> running_{false};
  std::atomic<long> tick_{0};

  mutable std::mutex clients_mutex_;
  std::map<int, Client> clients_;  ///< keyed by client id
  int next_client_ = 1;

  std::mutex inbound_mutex_;
  std::deque<Inbound> inbound_;

  std::thread sim_thread_;
  std::thread io_thread_;
};

}  // namespace cablebot
