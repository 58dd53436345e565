#include "cablebot/teleop_server.hpp"

#include "cablebot/errors.hpp"
#include "cablebot/protocol.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <spdlog/spdlog.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <vector>

namespace cablebot {

namespace {

void set_nonblocking(int fd) { ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL, 0) | O_NONBLOCK); }

}  // namespace

TeleopServer::TeleopServer(Runtime runtime, ServeOptions options)
    : runtime_(std::move(runtime)), options_(std::move(options)) {
  if (!(options_.real_time_factor > 0.0) || !(options_.frame_rate > 0.0) ||
      options_.command_queue == 0) {
    throw ConfigError("serve: real_time_factor, frame_rate and command_queue must be positive");
  }
}

TeleopServer::~TeleopServer() { stop(); }

void TeleopServer::start() {
  if (running_) return;
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw BindError(std::string("socket: ") + std::strerror(errno));
  const int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(options_.port));
  if (::inet_pton(AF_INET, options_.host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw BindError("invalid host '" + options_.host + "'");
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 ||
      ::listen(listen_fd_, 16) < 0) {
    const std::string err = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw BindError("cannot listen on " + options_.host + ":" + std::to_string(options_.port) + ": " + err);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  set_nonblocking(listen_fd_);
  if (::pipe(wake_pipe_) != 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw BindError(std::string("pipe: ") + std::strerror(errno));
  }
  set_nonblocking(wake_pipe_[0]);
  set_nonblocking(wake_pipe_[1]);
  running_ = true;
  spdlog::info("teleop server listening on {}:{}", options_.host, port_);
  io_thread_ = std::thread([this] { io_loop(); });
  sim_thread_ = std::thread([this] { sim_loop(); });
}

void TeleopServer::stop() {
  if (!running_.exchange(false)) return;
  wake_io();
  if (sim_thread_.joinable()) sim_thread_.join();
  if (io_thread_.joinable()) io_thread_.join();
  std::lock_guard lock(clients_mutex_);
  for (auto& [id, c] : clients_) ::close(c.fd);
  clients_.clear();
  ::close(listen_fd_);
  ::close(wake_pipe_[0]);
  ::close(wake_pipe_[1]);
  listen_fd_ = wake_pipe_[0] = wake_pipe_[1] = -1;
  spdlog::info("teleop server stopped after {} ticks", tick_.load());
}

std::size_t TeleopServer::client_count() const {
  std::lock_guard lock(clients_mutex_);
  return clients_.size();
}

void TeleopServer::wake_io() {
  const char b = 1;
  if (wake_pipe_[1] >= 0) [[maybe_unused]] auto n = ::write(wake_pipe_[1], &b, 1);
}

void TeleopServer::send_to(int client, const std::string& line) {
  {
    std::lock_guard lock(clients_mutex_);
    auto it = clients_.find(client);
    if (it == clients_.end()) return;
    it->second.outbox += line;
    it->second.outbox += '\n';
  }
  wake_io();
}

void TeleopServer::broadcast(const std::string& line) {
  {
    std::lock_guard lock(clients_mutex_);
    for (auto& [id, c] : clients_) {
      c.outbox += line;
      c.outbox += '\n';
    }
  }
  wake_io();
}

void TeleopServer::sim_loop() {
  using clock = std::chrono::steady_clock;
  const double tick_period = 1.0 / runtime_.control().rate_hz;
  const long ticks_per_frame =
      std::max(1L, std::lround(runtime_.control().rate_hz / options_.frame_rate));
  const auto start = clock::now();
  bool respond_next = false;
  while (running_) {
    std::deque<Inbound> batch;
    {
      std::lock_guard lock(inbound_mutex_);
      batch.swap(inbound_);
    }
    const long tick = tick_;
    for (const auto& in : batch) {
      nlohmann::json reply;
      try {
        reply = protocol::apply_command(runtime_, protocol::parse_command(in.line), tick);
      } catch (const Error& e) {
        reply = protocol::error_frame(e.what());
      }
      send_to(in.client, reply.dump());
      respond_next = true;
    }
    try {
      runtime_.run_tick();
    } catch (const NumericalDivergence& e) {
      spdlog::error("simulation diverged: {}", e.what());
      broadcast(protocol::error_frame(std::string("simulation diverged: ") + e.what()).dump());
      break;
    }
    const long done = ++tick_;
    // A frame right after applied commands keeps operator latency at one tick.
    if (done % ticks_per_frame == 0 || respond_next) {
      broadcast(protocol::state_frame(runtime_, done).dump());
      respond_next = false;
    }
    const auto due = start + std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(
                                 static_cast<double>(done) * tick_period / options_.real_time_factor));
    std::this_thread::sleep_until(due);
  }
}

void TeleopServer::io_loop() {
  std::vector<pollfd> fds;
  std::vector<int> ids;
  char buf[4096];
  while (running_) {
    fds.clear();
    ids.clear();
    fds.push_back({listen_fd_, POLLIN, 0});
    fds.push_back({wake_pipe_[0], POLLIN, 0});
    {
      std::lock_guard lock(clients_mutex_);
      for (auto& [id, c] : clients_) {
        short ev = POLLIN;
        if (!c.outbox.empty()) ev |= POLLOUT;
        fds.push_back({c.fd, ev, 0});
        ids.push_back(id);
      }
    }
    if (::poll(fds.data(), fds.size(), 100) < 0) {
      if (errno == EINTR) continue;
      spdlog::error("poll failed: {}", std::strerror(errno));
      break;
    }
    if (fds[1].revents & POLLIN) {
      while (::read(wake_pipe_[0], buf, sizeof buf) > 0) {
      }
    }
    if (fds[0].revents & POLLIN) {
      for (;;) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) break;
        set_nonblocking(fd);
        const int yes = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);
        std::lock_guard lock(clients_mutex_);
        const int id = next_client_++;
        clients_[id].fd = fd;
        spdlog::info("client {} connected", id);
      }
    }
    std::vector<int> drop;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const pollfd& p = fds[k + 2];
      const int id = ids[k];
      if (p.revents & (POLLERR | POLLNVAL)) {
        drop.push_back(id);
        continue;
      }
      if (p.revents & (POLLIN | POLLHUP)) {
        const ssize_t n = ::recv(p.fd, buf, sizeof buf, 0);
        if (n <= 0) {
          if (n == 0 || (errno != EAGAIN && errno != EWOULDBLOCK)) drop.push_back(id);
        } else {
          std::vector<std::string> lines;
          std::string overflow;
          {
            std::lock_guard lock(clients_mutex_);
            auto& inbox = clients_[id].inbox;
            inbox.append(buf, static_cast<std::size_t>(n));
            std::size_t pos;
            while ((pos = inbox.find('\n')) != std::string::npos) {
              std::string line = inbox.substr(0, pos);
              inbox.erase(0, pos + 1);
              if (!line.empty() && line.back() == '\r') line.pop_back();
              if (!line.empty()) lines.push_back(std::move(line));
            }
            if (inbox.size() > options_.client_buffer) {
              inbox.clear();
              overflow = "frame too long";
            }
          }
          if (!overflow.empty()) send_to(id, protocol::error_frame(overflow).dump());
          for (auto& line : lines) {
            bool full = false;
            {
              std::lock_guard lock(inbound_mutex_);
              if (inbound_.size() >= options_.command_queue) {
                full = true;
              } else {
                inbound_.push_back({id, std::move(line)});
              }
            }
            if (full) send_to(id, protocol::error_frame("command queue full").dump());
          }
        }
      }
      if (p.revents & POLLOUT) {
        std::lock_guard lock(clients_mutex_);
        auto it = clients_.find(id);
        if (it == clients_.end()) continue;
        auto& out = it->second.outbox;
        const ssize_t n = ::send(p.fd, out.data(), out.size(), MSG_NOSIGNAL);
        if (n > 0) {
          out.erase(0, static_cast<std::size_t>(n));
        } else if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK) {
          drop.push_back(id);
        }
      }
    }
    std::lock_guard lock(clients_mutex_);
    for (auto& [id, c] : clients_) {
      if (c.outbox.size() > options_.client_buffer) {
        spdlog::warn("client {} is not reading; dropping it", id);
        drop.push_back(id);
      }
    }
    for (int id : drop) {
      auto it = clients_.find(id);
      if (it == clients_.end()) continue;
      ::close(it->second.fd);
      clients_.erase(it);
      spdlog::info("client {} disconnected", id);
    }
  }
}

}  // namespace cablebot
