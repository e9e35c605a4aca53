#pragma once

// Blocking POSIX-socket transport for the register protocol.

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <list>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "v2h/wire/client.hpp"
#include "v2h/wire/frame.hpp"
#include "v2h/wire/register_store.hpp"

namespace v2h::wire {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  static Endpoint parse(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos) throw std::invalid_argument("endpoint needs host:port: " + text);
    Endpoint ep;
    ep.host = colon == 0 ? "127.0.0.1" : text.substr(0, colon);
    const long port = std::stol(text.substr(colon + 1));
    if (port < 0 || port > 0xFFFF) throw std::invalid_argument("port out of range: " + text);
    ep.port = static_cast<std::uint16_t>(port);
    return ep;
  }

  std::string str() const { return host + ":" + std::to_string(port); }
};

/// Owning file descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { reset(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }
  void shutdown() const {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }

 private:
  int fd_ = -1;
};

namespace detail {

inline sockaddr_in resolve(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(ep.host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw std::runtime_error("cannot resolve host " + ep.host);
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

// Reads exactly n bytes; false on EOF, error or timeout.
inline bool read_exact(int fd, std::uint8_t* out, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd, out + got, n - got, 0);
    if (r > 0) {
      got += static_cast<std::size_t>(r);
    } else if (r < 0 && errno == EINTR) {
      continue;
    } else {
      return false;
    }
  }
  return true;
}

inline bool write_all(int fd, const std::vector<std::uint8_t>& bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t r = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (r > 0) {
      sent += static_cast<std::size_t>(r);
    } else if (r < 0 && errno == EINTR) {
      continue;
    } else {
      return false;
    }
  }
  return true;
}

// One MBAP message from a stream socket; empty on EOF/garbage.
inline std::vector<std::uint8_t> read_message(int fd) {
  std::vector<std::uint8_t> buf(kMbapSize);
  if (!read_exact(fd, buf.data(), 6)) return {};
  const std::size_t total = *announced_size(buf);
  if (total < kMbapSize + 1 || total > kMbapSize + 254) return {};
  buf.resize(total);
  if (!read_exact(fd, buf.data() + 6, total - 6)) return {};
  return buf;
}

inline void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

}  // namespace detail

/// Serves one register slave over TCP. Each connection gets its own thread.
class TcpRegisterServer {
 public:
  TcpRegisterServer(RegisterSlave& slave, const Endpoint& endpoint) : slave_(slave) {
    listener_ = Socket(::socket(AF_INET, SOCK_STREAM, 0));
    if (!listener_.valid()) throw std::runtime_error("socket(): " + std::string(std::strerror(errno)));
    int one = 1;
    ::setsockopt(listener_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    auto addr = detail::resolve(endpoint);
    if (::bind(listener_.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      throw std::runtime_error("bind " + endpoint.str() + ": " + std::strerror(errno));
    }
    if (::listen(listener_.fd(), 16) != 0) {
      throw std::runtime_error("listen: " + std::string(std::strerror(errno)));
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listener_.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
    endpoint_ = endpoint;
    endpoint_.port = ntohs(addr.sin_port);
    acceptor_ = std::thread([this] { accept_loop(); });
  }

  TcpRegisterServer(const TcpRegisterServer&) = delete;
  TcpRegisterServer& operator=(const TcpRegisterServer&) = delete;
  ~TcpRegisterServer() { stop(); }

  const Endpoint& endpoint() const { return endpoint_; }

  void stop() {
    if (stopping_.exchange(true)) return;
    listener_.shutdown();
    if (acceptor_.joinable()) acceptor_.join();
    std::list<Connection> conns;
    {
      std::lock_guard lock(mu_);
      for (auto& c : connections_) c.socket.shutdown();
      conns.splice(conns.end(), connections_);
    }
    for (auto& c : conns) {
      if (c.worker.joinable()) c.worker.join();
    }
    listener_.reset();
  }

 private:
  struct Connection {
    Socket socket;
    std::thread worker;
  };

  void accept_loop() {
    while (!stopping_) {
      pollfd pfd{listener_.fd(), POLLIN, 0};
      const int ready = ::poll(&pfd, 1, 100);
      if (ready <= 0) continue;
      const int fd = ::accept(listener_.fd(), nullptr, nullptr);
      if (fd < 0) continue;
      detail::set_nodelay(fd);
      std::lock_guard lock(mu_);
      if (stopping_) {
        ::close(fd);
        break;
      }
      auto& conn = connections_.emplace_back();
      conn.socket = Socket(fd);
      conn.worker = std::thread([this, fd] { serve(fd); });
    }
  }

  void serve(int fd) {
    while (!stopping_) {
      const auto msg = detail::read_message(fd);
      if (msg.empty()) break;
      const auto reply = slave_.handle_bytes(msg);
      if (!reply || !detail::write_all(fd, *reply)) break;
    }
    ::shutdown(fd, SHUT_RDWR);
  }

  RegisterSlave& slave_;
  Endpoint endpoint_;
  Socket listener_;
  std::thread acceptor_;
  std::atomic<bool> stopping_{false};
  std::mutex mu_;
  std::list<Connection> connections_;
};

/// Starts a server for `slave`; port 0 binds an ephemeral port.
inline std::unique_ptr<TcpRegisterServer> serve_registers(RegisterSlave& slave,
                                                          const Endpoint& endpoint) {
  return std::make_unique<TcpRegisterServer>(slave, endpoint);
}

/// Client for one unit behind a TCP endpoint. Reconnects lazily after errors.
class TcpRegisterClient : public RegisterClient {
 public:
  TcpRegisterClient(Endpoint endpoint, std::uint8_t unit_id, std::string name,
                    std::chrono::milliseconds timeout = std::chrono::milliseconds(500))
      : endpoint_(std::move(endpoint)), unit_id_(unit_id), name_(std::move(name)),
        timeout_(timeout) {}

  std::vector<std::uint16_t> read_holding(std::uint16_t addr, std::uint16_t count) override {
    const auto req = read_request(next_txn(), unit_id_, addr, count);
    return detail::check_read(name_, exchange(req), req);
  }

  void write_multiple(std::uint16_t addr, std::span<const std::uint16_t> words) override {
    const auto req = write_request(next_txn(), unit_id_, addr, {words.begin(), words.end()});
    detail::check_write(name_, exchange(req), req);
  }

  std::string name() const override { return name_ + "@" + endpoint_.str(); }

 private:
  void connect() {
    Socket s(::socket(AF_INET, SOCK_STREAM, 0));
    if (!s.valid()) throw DeviceTimeout(name(), "socket(): " + std::string(std::strerror(errno)));
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(timeout_.count() / 1000);
    tv.tv_usec = static_cast<suseconds_t>((timeout_.count() % 1000) * 1000);
    ::setsockopt(s.fd(), SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
    ::setsockopt(s.fd(), SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
    detail::set_nodelay(s.fd());
    auto addr = detail::resolve(endpoint_);
    if (::connect(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      throw DeviceTimeout(name(), std::string("connect: ") + std::strerror(errno));
    }
    sock_ = std::move(s);
  }

  RegisterFrame exchange(const RegisterFrame& req) {
    if (!sock_.valid()) connect();
    const auto bytes = encode_frame(req);
    if (!detail::write_all(sock_.fd(), bytes)) {
      sock_.reset();
      throw DeviceTimeout(name(), "send failed");
    }
    const auto reply = detail::read_message(sock_.fd());
    if (reply.empty()) {
      sock_.reset();
      throw DeviceTimeout(name(), "no response");
    }
    try {
      return decode_frame(reply, FrameKind::Response);
    } catch (const WireError& e) {
      sock_.reset();
      throw DeviceTimeout(name(), e.what());
    }
  }

  std::uint16_t next_txn() { return ++txn_; }

  Endpoint endpoint_;
  std::uint8_t unit_id_;
  std::string name_;
  std::chrono::milliseconds timeout_;
  Socket sock_;
  std::uint16_t txn_ = 0;
};

}  // namespace v2h::wire
