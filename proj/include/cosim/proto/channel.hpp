// SPDX-License-Identifier: Apache-2.0
//
// Channel topology: the device process listens on one endpoint; the host
// connects four times, once per ChannelId. Every connection starts with the
// connector sending Hello{version, channel_id, role}; the listener replies
// Hello with the matching channel_id, or closes the connection to reject it
// (version mismatch, duplicate live channel_id, malformed handshake).
//
// All four connections form one session. When any of them drops, the whole
// session is torn down and the survivor either resumes listening (device)
// or reconnects with bounded exponential backoff (host).

#pragma once

#include <array>
#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <thread>

#include "cosim/proto/wire.hpp"
#include "cosim/support/net.hpp"

namespace cosim::proto {

inline constexpr int kHandshakeTimeoutMs = 5000;

// One framed unidirectional-by-convention message pipe. The codec is
// symmetric; which side sends is fixed by the ChannelId topology.
class Channel {
 public:
  Channel() = default;
  Channel(net::Socket sock, ChannelId id)
      : sock_(std::move(sock)), id_(id), connected_(true) {}

  bool connected() const { return connected_; }
  ChannelId id() const { return id_; }
  int fd() const { return sock_.fd(); }

  // Frames are written atomically from the caller's point of view: one
  // logical thread per channel, whole frame per call.
  bool send(const WireMessage& m) {
    if (!connected_) return false;
    if (!sock_.send_all(encode_frame(m))) {
      connected_ = false;
      return false;
    }
    return true;
  }

  // Drains whatever the socket has without blocking.
  void pump() {
    if (!connected_) return;
    uint8_t buf[16384];
    for (;;) {
      bool eof = false;
      size_t n = sock_.recv_some(buf, &eof);
      if (n > 0) dec_.feed(std::span<const uint8_t>(buf, n));
      if (eof) {
        connected_ = false;
        return;
      }
      if (n < sizeof(buf)) return;
    }
  }

  // Next decoded message, if a complete frame is buffered. Throws
  // ProtocolError on malformed input.
  std::optional<WireMessage> pop() { return dec_.next(); }

  void close() {
    sock_.close();
    connected_ = false;
  }

 private:
  net::Socket sock_;
  FrameDecoder dec_;
  ChannelId id_{};
  bool connected_ = false;
};

struct BackoffPolicy {
  int initial_ms = 50;
  int max_ms = 1000;
  int total_ms = 10000;  // give up after this much elapsed time
};

namespace detail {

inline bool handshake_connect(Channel& ch, ChannelId id, Role role) {
  if (!ch.send(Hello{kProtocolVersion, static_cast<uint8_t>(id),
                     static_cast<uint8_t>(role)}))
    return false;
  // Reply arrives as one small frame; poll the socket until decodable.
  auto deadline = std::chrono::steady_clock::now() +
                  std::chrono::milliseconds(kHandshakeTimeoutMs);
  while (std::chrono::steady_clock::now() < deadline) {
    ch.pump();
    if (!ch.connected()) return false;
    std::optional<WireMessage> m;
    try {
      m = ch.pop();
    } catch (const ProtocolError&) {
      return false;
    }
    if (m) {
      auto* h = std::get_if<Hello>(&*m);
      return h && h->version == kProtocolVersion &&
             h->channel_id == static_cast<uint8_t>(id);
    }
    pollfd p{ch.fd(), POLLIN, 0};
    ::poll(&p, 1, 10);
  }
  return false;
}

}  // namespace detail

// Host-side set of four connected channels.
class HostChannels {
 public:
  // One connection attempt: all four channels with handshakes. nullopt on
  // any failure (everything opened so far is closed).
  static std::optional<HostChannels> connect_once(const net::Endpoint& ep) {
    HostChannels hc;
    for (size_t i = 0; i < kChannelCount; ++i) {
      auto sock = net::connect_to(ep);
      if (!sock) return std::nullopt;
      Channel ch(std::move(*sock), static_cast<ChannelId>(i));
      if (!detail::handshake_connect(ch, static_cast<ChannelId>(i), Role::kHost))
        return std::nullopt;
      hc.ch_[i] = std::move(ch);
    }
    return hc;
  }

  // Retries connect_once with bounded exponential backoff.
  static std::optional<HostChannels> connect(const net::Endpoint& ep,
                                             const BackoffPolicy& bp = {}) {
    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::milliseconds(bp.total_ms);
    int delay = bp.initial_ms;
    for (;;) {
      if (auto hc = connect_once(ep)) return hc;
      if (std::chrono::steady_clock::now() + std::chrono::milliseconds(delay) >
          deadline)
        return std::nullopt;
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
      delay = std::min(delay * 2, bp.max_ms);
    }
  }

  Channel& at(ChannelId id) { return ch_[static_cast<size_t>(id)]; }

  bool all_connected() const {
    for (const auto& c : ch_)
      if (!c.connected()) return false;
    return true;
  }

  void close_all() {
    for (auto& c : ch_) c.close();
  }

 private:
  std::array<Channel, kChannelCount> ch_;
};

// Device-side listener: accepts connections, demultiplexes them into the
// four channel slots by Hello.channel_id, and tears the whole session down
// when any live channel drops.
class ChannelServer {
 public:
  explicit ChannelServer(const net::Endpoint& ep) : listener_(net::Listener::open(ep)) {}

  const net::Endpoint& bound() const { return listener_.bound(); }
  int listener_fd() const { return listener_.fd(); }

  // Accepts and handshakes pending connections. Cheap when nothing is
  // pending. Returns true if the session just became fully connected.
  bool pump_accept() {
    bool was_complete = session_live_;
    while (auto sock = listener_.accept_nonblocking()) {
      admit(std::move(*sock));
    }
    session_live_ = true;
    for (const auto& c : ch_)
      if (!c.connected()) session_live_ = false;
    return session_live_ && !was_complete;
  }

  Channel& at(ChannelId id) { return ch_[static_cast<size_t>(id)]; }
  bool session_live() const { return session_live_; }
  uint64_t rejected_connections() const { return rejected_; }

  // Detects EOF on any live channel. Call after pumping; returns true when
  // the session died and was torn down.
  bool check_disconnect() {
    if (!session_live_) return false;
    for (auto& c : ch_) {
      if (!c.connected()) {
        drop_session();
        return true;
      }
    }
    return false;
  }

  void drop_session() {
    for (auto& c : ch_) c.close();
    session_live_ = false;
  }

 private:
  void admit(net::Socket sock) {
    // Hello frame is 9 bytes: 4-byte length prefix + 5-byte body.
    std::array<uint8_t, 9> raw{};
    if (!sock.recv_exact(raw, kHandshakeTimeoutMs)) return;
    FrameDecoder dec;
    dec.feed(raw);
    std::optional<WireMessage> m;
    try {
      m = dec.next();
    } catch (const ProtocolError&) {
      rejected_++;
      return;
    }
    if (!m) {
      rejected_++;
      return;
    }
    auto* h = std::get_if<Hello>(&*m);
    if (!h || h->version != kProtocolVersion || h->channel_id >= kChannelCount) {
      rejected_++;
      return;  // closing the socket rejects the connection
    }
    auto id = static_cast<ChannelId>(h->channel_id);
    if (ch_[h->channel_id].connected()) {
      rejected_++;
      return;  // duplicate channel_id while one is live
    }
    Channel ch(std::move(sock), id);
    if (!ch.send(Hello{kProtocolVersion, h->channel_id,
                       static_cast<uint8_t>(Role::kDevice)}))
      return;
    ch_[h->channel_id] = std::move(ch);
  }

  net::Listener listener_;
  std::array<Channel, kChannelCount> ch_;
  bool session_live_ = false;
  uint64_t rejected_ = 0;
};

}  // namespace cosim::proto
