// SPDX-License-Identifier: Apache-2.0
//
// Device-side view of the four bridge channels. Two backings:
//
//   SocketDeviceEndpoint — real transport via ChannelServer; free-run mode.
//   LoopbackEndpoint     — in-process queues a lockstep harness fills, which
//                          makes message-arrival cycles fully deterministic.
//
// The bridge only sees this interface, so both backings behave identically
// at the protocol level.

#pragma once

#include <array>
#include <deque>
#include <optional>

#include "cosim/proto/channel.hpp"
#include "cosim/proto/wire.hpp"

namespace cosim::dev {

class DeviceEndpoint {
 public:
  virtual ~DeviceEndpoint() = default;

  // Transport pump, called once per kernel cycle before consuming.
  virtual void poll() = 0;

  virtual std::optional<proto::WireMessage> pop(proto::ChannelId ch) = 0;
  virtual bool send(proto::ChannelId ch, const proto::WireMessage& m) = 0;

  virtual bool session_live() const = 0;
  // True exactly once per session death (edge signal for recovery).
  virtual bool take_disconnect_event() = 0;
  // True exactly once per fresh handshake.
  virtual bool take_connect_event() = 0;
};

class SocketDeviceEndpoint final : public DeviceEndpoint {
 public:
  explicit SocketDeviceEndpoint(const net::Endpoint& ep) : server_(ep) {}

  proto::ChannelServer& server() { return server_; }
  const net::Endpoint& bound() const { return server_.bound(); }

  void poll() override {
    if (server_.pump_accept()) connect_event_ = true;
    if (!server_.session_live()) return;
    server_.at(proto::ChannelId::kH2dReq).pump();
    server_.at(proto::ChannelId::kD2hResp).pump();
    if (server_.check_disconnect()) disconnect_event_ = true;
  }

  std::optional<proto::WireMessage> pop(proto::ChannelId ch) override {
    if (!server_.session_live()) return std::nullopt;
    auto& c = server_.at(ch);
    auto m = c.pop();  // may throw ProtocolError: fatal for the run
    if (!c.connected() && server_.check_disconnect()) disconnect_event_ = true;
    return m;
  }

  bool send(proto::ChannelId ch, const proto::WireMessage& m) override {
    if (!server_.session_live()) return false;
    if (!server_.at(ch).send(m)) {
      if (server_.check_disconnect()) disconnect_event_ = true;
      return false;
    }
    return true;
  }

  bool session_live() const override { return server_.session_live(); }

  bool take_disconnect_event() override {
    bool e = disconnect_event_;
    disconnect_event_ = false;
    return e;
  }

  bool take_connect_event() override {
    bool e = connect_event_;
    connect_event_ = false;
    return e;
  }

 private:
  proto::ChannelServer server_;
  bool disconnect_event_ = false;
  bool connect_event_ = false;
};

// Lockstep harness endpoint. The test delivers inbound messages at chosen
// cycles and inspects what the bridge sent.
class LoopbackEndpoint final : public DeviceEndpoint {
 public:
  void deliver(proto::ChannelId ch, proto::WireMessage m) {
    inbound_[static_cast<size_t>(ch)].push_back(std::move(m));
  }

  std::deque<proto::WireMessage>& sent(proto::ChannelId ch) {
    return outbound_[static_cast<size_t>(ch)];
  }

  std::optional<proto::WireMessage> take_sent(proto::ChannelId ch) {
    auto& q = outbound_[static_cast<size_t>(ch)];
    if (q.empty()) return std::nullopt;
    auto m = std::move(q.front());
    q.pop_front();
    return m;
  }

  // Simulates the host vanishing: drops queued traffic.
  void kill_session() {
    if (!live_) return;
    live_ = false;
    disconnect_event_ = true;
    for (auto& q : inbound_) q.clear();
    for (auto& q : outbound_) q.clear();
  }

  void revive_session() {
    if (live_) return;
    live_ = true;
    connect_event_ = true;
  }

  void poll() override {}

  std::optional<proto::WireMessage> pop(proto::ChannelId ch) override {
    auto& q = inbound_[static_cast<size_t>(ch)];
    if (!live_ || q.empty()) return std::nullopt;
    auto m = std::move(q.front());
    q.pop_front();
    return m;
  }

  bool send(proto::ChannelId ch, const proto::WireMessage& m) override {
    if (!live_) return false;
    outbound_[static_cast<size_t>(ch)].push_back(m);
    return true;
  }

  bool session_live() const override { return live_; }

  bool take_disconnect_event() override {
    bool e = disconnect_event_;
    disconnect_event_ = false;
    return e;
  }

  bool take_connect_event() override {
    bool e = connect_event_;
    connect_event_ = false;
    return e;
  }

 private:
  std::array<std::deque<proto::WireMessage>, proto::kChannelCount> inbound_;
  std::array<std::deque<proto::WireMessage>, proto::kChannelCount> outbound_;
  bool live_ = true;
  bool disconnect_event_ = false;
  bool connect_event_ = false;
};

}  // namespace cosim::dev
