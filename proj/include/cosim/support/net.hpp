// SPDX-License-Identifier: Apache-2.0
//
// Minimal POSIX stream-socket plumbing for the bridge channels. Endpoints
// are "host:port" (TCP, port 0 picks an ephemeral port) or a filesystem
// path (Unix domain socket, recognized by a '/' in the string).

#pragma once

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cosim::net {

struct Endpoint {
  bool is_unix = false;
  std::string host;  // TCP only
  uint16_t port = 0; // TCP only
  std::string path;  // Unix only

  std::string str() const {
    return is_unix ? path : host + ":" + std::to_string(port);
  }
};

inline std::optional<Endpoint> parse_endpoint(const std::string& s) {
  if (s.empty()) return std::nullopt;
  if (s.find('/') != std::string::npos) {
    Endpoint e;
    e.is_unix = true;
    e.path = s;
    return e;
  }
  auto colon = s.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 >= s.size())
    return std::nullopt;
  Endpoint e;
  e.host = s.substr(0, colon);
  try {
    unsigned long p = std::stoul(s.substr(colon + 1));
    if (p > 65535) return std::nullopt;
    e.port = static_cast<uint16_t>(p);
  } catch (...) {
    return std::nullopt;
  }
  return e;
}

// Move-only fd owner.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }

  void close() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

  // Writes the whole buffer. Returns false on any error (peer gone).
  bool send_all(std::span<const uint8_t> data) {
    size_t off = 0;
    while (off < data.size()) {
      ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        return false;
      }
      if (n == 0) return false;
      off += static_cast<size_t>(n);
    }
    return true;
  }

  // Nonblocking read. Returns bytes read (possibly 0 when nothing pending);
  // sets *eof when the peer closed or the connection errored.
  size_t recv_some(std::span<uint8_t> buf, bool* eof) {
    *eof = false;
    ssize_t n = ::recv(fd_, buf.data(), buf.size(), MSG_DONTWAIT);
    if (n > 0) return static_cast<size_t>(n);
    if (n == 0) {
      *eof = true;
      return 0;
    }
    if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) return 0;
    *eof = true;
    return 0;
  }

  // Blocking read of exactly n bytes with a deadline; used only for the
  // connection handshake.
  bool recv_exact(std::span<uint8_t> buf, int timeout_ms) {
    size_t off = 0;
    while (off < buf.size()) {
      pollfd p{fd_, POLLIN, 0};
      int r = ::poll(&p, 1, timeout_ms);
      if (r <= 0) return false;
      ssize_t n = ::recv(fd_, buf.data() + off, buf.size() - off, 0);
      if (n <= 0) {
        if (n < 0 && errno == EINTR) continue;
        return false;
      }
      off += static_cast<size_t>(n);
    }
    return true;
  }

 private:
  int fd_ = -1;
};

inline void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

inline std::optional<Socket> connect_to(const Endpoint& ep) {
  if (ep.is_unix) {
    sockaddr_un sa{};
    sa.sun_family = AF_UNIX;
    if (ep.path.size() >= sizeof(sa.sun_path)) return std::nullopt;
    std::strncpy(sa.sun_path, ep.path.c_str(), sizeof(sa.sun_path) - 1);
    int fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
    if (fd < 0) return std::nullopt;
    if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
      ::close(fd);
      return std::nullopt;
    }
    return Socket(fd);
  }

  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  std::string port = std::to_string(ep.port);
  if (::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res) != 0)
    return std::nullopt;
  std::optional<Socket> out;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
      set_nodelay(fd);
      out = Socket(fd);
      break;
    }
    ::close(fd);
  }
  ::freeaddrinfo(res);
  return out;
}

class Listener {
 public:
  Listener() = default;
  Listener(Listener&&) = default;
  Listener& operator=(Listener&&) = default;
  ~Listener() {
    if (!unlink_path_.empty()) ::unlink(unlink_path_.c_str());
  }

  // Binds and listens; throws std::runtime_error on failure. For TCP with
  // port 0 the bound endpoint reports the kernel-assigned port.
  static Listener open(const Endpoint& ep) {
    Listener l;
    if (ep.is_unix) {
      ::unlink(ep.path.c_str());
      sockaddr_un sa{};
      sa.sun_family = AF_UNIX;
      if (ep.path.size() >= sizeof(sa.sun_path))
        throw std::runtime_error("unix socket path too long: " + ep.path);
      std::strncpy(sa.sun_path, ep.path.c_str(), sizeof(sa.sun_path) - 1);
      int fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
      if (fd < 0) throw std::runtime_error("socket(): " + std::string(strerror(errno)));
      if (::bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0 ||
          ::listen(fd, 16) != 0) {
        int e = errno;
        ::close(fd);
        throw std::runtime_error("bind/listen " + ep.path + ": " + strerror(e));
      }
      l.sock_ = Socket(fd);
      l.bound_ = ep;
      l.unlink_path_ = ep.path;
      return l;
    }

    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    std::string port = std::to_string(ep.port);
    if (::getaddrinfo(ep.host.empty() ? nullptr : ep.host.c_str(), port.c_str(),
                      &hints, &res) != 0)
      throw std::runtime_error("cannot resolve " + ep.str());
    int fd = -1;
    int err = 0;
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
      fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd < 0) continue;
      int one = 1;
      ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
      if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 16) == 0)
        break;
      err = errno;
      ::close(fd);
      fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0)
      throw std::runtime_error("bind/listen " + ep.str() + ": " + strerror(err));
    l.sock_ = Socket(fd);
    l.bound_ = ep;

    sockaddr_storage ss{};
    socklen_t slen = sizeof(ss);
    if (::getsockname(fd, reinterpret_cast<sockaddr*>(&ss), &slen) == 0) {
      if (ss.ss_family == AF_INET)
        l.bound_.port = ntohs(reinterpret_cast<sockaddr_in*>(&ss)->sin_port);
      else if (ss.ss_family == AF_INET6)
        l.bound_.port = ntohs(reinterpret_cast<sockaddr_in6*>(&ss)->sin6_port);
    }
    return l;
  }

  std::optional<Socket> accept_nonblocking() {
    pollfd p{sock_.fd(), POLLIN, 0};
    if (::poll(&p, 1, 0) <= 0) return std::nullopt;
    int fd = ::accept(sock_.fd(), nullptr, nullptr);
    if (fd < 0) return std::nullopt;
    if (!bound_.is_unix) set_nodelay(fd);
    return Socket(fd);
  }

  int fd() const { return sock_.fd(); }
  const Endpoint& bound() const { return bound_; }

 private:
  Socket sock_;
  Endpoint bound_;
  std::string unlink_path_;
};

}  // namespace cosim::net
