#pragma once

// TCP front end for Service. Each connection carries newline-terminated JSON
// messages; a connection whose first bytes are "GET " is answered as a
// one-shot HTTP request for /health or /sessions instead.

#include "lifecycle/error.hpp"
#include "lifecycle/service.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <list>
#include <mutex>
#include <string>
#include <thread>

namespace lifecycle {

struct BindAddress {
  std::string host = "127.0.0.1";
  int port = 8765;
};

inline BindAddress parse_bind_address(const std::string& text) {
  const auto colon = text.rfind(':');
  BindAddress a;
  std::string port = text;
  if (colon != std::string::npos) {
    a.host = text.substr(0, colon);
    port = text.substr(colon + 1);
  }
  try {
    std::size_t used = 0;
    a.port = std::stoi(port, &used);
    if (used != port.size() || a.port < 0 || a.port > 65535) throw std::out_of_range("port");
  } catch (const std::exception&) {
    throw Error(ErrorKind::Validation, "bad bind address '" + text + "', expected HOST:PORT");
  }
  if (a.host.empty()) a.host = "0.0.0.0";
  return a;
}

class Server {
 public:
  Server(Service& service, const BindAddress& addr) : service_{service} {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    const auto port = std::to_string(addr.port);
    if (int rc = getaddrinfo(addr.host.c_str(), port.c_str(), &hints, &res); rc != 0)
      throw Error(ErrorKind::Validation, "cannot resolve '" + addr.host + "': " + gai_strerror(rc));
    listen_fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    const bool ok = listen_fd_ >= 0 && ::bind(listen_fd_, res->ai_addr, res->ai_addrlen) == 0 &&
                    ::listen(listen_fd_, 64) == 0;
    freeaddrinfo(res);
    if (!ok) {
      const std::string why = std::strerror(errno);
      if (listen_fd_ >= 0) ::close(listen_fd_);
      throw Error(ErrorKind::Validation, "cannot bind " + addr.host + ":" + port + ": " + why);
    }
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
  }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  ~Server() {
    stop();
    join_all();
    if (listen_fd_ >= 0) ::close(listen_fd_);
  }

  int port() const noexcept { return port_; }

  void stop() noexcept { stopping_ = true; }

  // Accepts until stop() or until *external becomes true (signal handlers).
  void run(const volatile std::sig_atomic_t* external = nullptr) {
    while (!stopping_ && !(external && *external)) {
      pollfd pfd{listen_fd_, POLLIN, 0};
      if (::poll(&pfd, 1, kPollMs) <= 0) continue;
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) continue;
      std::lock_guard lock{threads_mutex_};
      workers_.emplace_back([this, fd, external] { serve_connection(fd, external); });
    }
    stopping_ = true;
    join_all();
  }

 private:
  static constexpr int kPollMs = 100;
  static constexpr std::size_t kMaxLine = 1 << 20;

  static bool send_all(int fd, const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
      const auto n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
      if (n <= 0) return false;
      off += static_cast<std::size_t>(n);
    }
    return true;
  }

  std::string http_reply(const std::string& request_line) const {
    std::string target;
    if (const auto sp = request_line.find(' ', 4); sp != std::string::npos) target = request_line.substr(4, sp - 4);
    int status = 200;
    std::string body;
    if (target == "/health") {
      body = wire::json{{"status", "ok"}, {"study_id", service_.config().study_id}}.dump();
    } else if (target == "/sessions") {
      body = service_.progress().dump();
    } else {
      status = 404;
      body = wire::json{{"error", "not found"}}.dump();
    }
    return "HTTP/1.1 " + std::to_string(status) + (status == 200 ? " OK" : " Not Found") +
           "\r\nContent-Type: application/json\r\nContent-Length: " + std::to_string(body.size()) +
           "\r\nConnection: close\r\n\r\n" + body;
  }

  void serve_connection(int fd, const volatile std::sig_atomic_t* external) {
    Service::Connection conn;
    std::string buffer;
    bool first = true;
    char chunk[4096];
    while (!stopping_ && !(external && *external)) {
      pollfd pfd{fd, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, kPollMs);
      if (ready == 0) continue;
      if (ready < 0) break;
      const auto n = ::recv(fd, chunk, sizeof chunk, 0);
      if (n <= 0) break;
      buffer.append(chunk, static_cast<std::size_t>(n));
      if (first && buffer.size() >= 4) {
        first = false;
        if (buffer.compare(0, 4, "GET ") == 0) {
          const auto eol = buffer.find('\n');
          if (eol == std::string::npos && buffer.size() < kMaxLine) {
            first = true;
            continue;
          }
          send_all(fd, http_reply(buffer.substr(0, eol)));
          break;
        }
      }
      std::size_t start = 0;
      bool ok = true;
      for (auto eol = buffer.find('\n', start); eol != std::string::npos; eol = buffer.find('\n', start)) {
        std::string line = buffer.substr(start, eol - start);
        start = eol + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::string reply;
        for (const auto& out : service_.handle(conn, line)) reply += out + '\n';
        if (!send_all(fd, reply)) {
          ok = false;
          break;
        }
      }
      buffer.erase(0, start);
      if (!ok || buffer.size() > kMaxLine) break;
    }
    ::shutdown(fd, SHUT_RDWR);
    ::close(fd);
  }

  void join_all() {
    std::list<std::thread> done;
    {
      std::lock_guard lock{threads_mutex_};
      done.swap(workers_);
    }
    for (auto& t : done)
      if (t.joinable()) t.join();
  }

  Service& service_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stopping_{false};
  std::mutex threads_mutex_;
  std::list<std::thread> workers_;
};

}  // namespace lifecycle
