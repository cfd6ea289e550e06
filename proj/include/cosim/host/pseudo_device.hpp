// SPDX-License-Identifier: Apache-2.0
//
// PCIe FPGA pseudo device: the host-side endpoint of the bridge channels.
// Driver-level code calls mmio_read/mmio_write against the configured BARs;
// device-originated memory and interrupt requests are serviced from the
// same thread through serve_device_requests.
//
// A blocked MMIO read keeps servicing interleaved device requests while it
// waits (nested servicing), so a device whose read completion depends on a
// host-memory fetch cannot deadlock. Responses must arrive in request
// order; a mismatched tag is a fatal protocol error.
//
// On disconnect: a blocked read completes all-ones and is logged, posted
// writes are dropped, and reconnect() restores operation with a fresh
// four-channel handshake.

#pragma once

#include <poll.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cosim/config.hpp"
#include "cosim/host/guest_memory.hpp"
#include "cosim/proto/channel.hpp"
#include "cosim/proto/checker.hpp"
#include "cosim/proto/wire.hpp"

namespace cosim::host {

class PseudoDevice {
 public:
  struct Stats {
    uint64_t mmio_reads = 0;
    uint64_t mmio_writes = 0;
    uint64_t aborted_reads = 0;       // all-ones completions (disconnect/status)
    uint64_t served_mem_reads = 0;
    uint64_t served_mem_writes = 0;
    uint64_t mem_write_errors = 0;    // posted writes out of range: logged only
    uint64_t interrupts = 0;          // dispatched to a registered handler
    uint64_t spurious_interrupts = 0; // unregistered or out-of-range vector
    uint64_t disconnects = 0;
    uint64_t reconnects = 0;
  };

  PseudoDevice(DeviceConfig cfg, uint64_t mem_size)
      : cfg_(std::move(cfg)), mem_(mem_size) {
    if (auto err = cfg_.validate()) throw std::invalid_argument(*err);
    log_ = [](const std::string& msg) {
      std::fprintf(stderr, "[host] %s\n", msg.c_str());
    };
  }

  GuestMemory& memory() { return mem_; }
  const DeviceConfig& config() const { return cfg_; }
  const Stats& stats() const { return stats_; }
  const proto::ProtocolChecker& checker() const { return checker_; }
  void set_logger(std::function<void(const std::string&)> fn) { log_ = std::move(fn); }

  bool connected() const { return channels_.has_value(); }

  bool connect(const net::Endpoint& ep, const proto::BackoffPolicy& bp = {}) {
    auto hc = proto::HostChannels::connect(ep, bp);
    if (!hc) return false;
    channels_ = std::move(hc);
    checker_.reset_outstanding();
    endpoint_ = ep;
    return true;
  }

  // Bounded-backoff reconnect to the last endpoint.
  bool reconnect(const proto::BackoffPolicy& bp = {}) {
    drop_session("reconnect requested");
    if (!connect(endpoint_, bp)) return false;
    stats_.reconnects++;
    return true;
  }

  void disconnect() { drop_session("local close"); }

  // Handlers run inside the servicing loop, possibly nested under a blocked
  // MMIO read; they must not issue MMIO themselves.
  void register_msi_handler(uint16_t vector, std::function<void()> handler) {
    if (vector >= cfg_.msi_vectors)
      throw std::invalid_argument("MSI vector out of configured range");
    msi_handlers_[vector] = std::move(handler);
  }
  uint64_t msi_pending(uint16_t vector) const {
    auto it = msi_pending_.find(vector);
    return it == msi_pending_.end() ? 0 : it->second;
  }

  // --- MMIO (driver API) ---

  // Blocking read; stays responsive to device requests while waiting.
  // Returns all-ones on error status or disconnect. timeout_ms < 0 waits
  // indefinitely (free-run semantics); on timeout returns nullopt.
  std::optional<std::vector<uint8_t>> mmio_read_for(uint8_t bar, uint64_t offset,
                                                    uint32_t len, int timeout_ms) {
    check_access(bar, offset, len);
    stats_.mmio_reads++;
    if (!connected()) {
      stats_.aborted_reads++;
      log_("mmio read while disconnected: returning all-ones");
      return all_ones(len);
    }
    uint32_t tag = next_tag_++;
    proto::WireMessage req = proto::MmioReadReq{bar, offset, len, tag};
    checker_.observe(proto::ChannelId::kH2dReq, req);
    if (!ch(proto::ChannelId::kH2dReq).send(req)) {
      on_disconnect("send failed on H2D_REQ");
      stats_.aborted_reads++;
      return all_ones(len);
    }

    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::milliseconds(timeout_ms < 0 ? 0 : timeout_ms);
    for (;;) {
      serve_pending();
      if (!connected()) {
        stats_.aborted_reads++;
        return all_ones(len);
      }
      auto& resp_ch = ch(proto::ChannelId::kH2dResp);
      std::optional<proto::WireMessage> m;
      try {
        m = resp_ch.pop();
      } catch (const proto::ProtocolError&) {
        on_disconnect("malformed frame on H2D_RESP");
        throw;
      }
      if (m) {
        checker_.observe(proto::ChannelId::kH2dResp, *m);  // throws on tag mismatch
        auto& resp = std::get<proto::MmioReadResp>(*m);
        if (resp.tag != tag)
          throw proto::ProtocolError("response tag does not match oldest read");
        if (resp.status != 0) {
          stats_.aborted_reads++;
          log_("mmio read completed with status " + std::to_string(resp.status));
          return all_ones(len);
        }
        if (resp.data.size() != len)
          throw proto::ProtocolError("mmio read response length mismatch");
        return resp.data;
      }
      int wait = -1;
      if (timeout_ms >= 0) {
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                        deadline - std::chrono::steady_clock::now())
                        .count();
        if (left <= 0) return std::nullopt;
        wait = static_cast<int>(left);
      }
      wait_and_pump(wait);
    }
  }

  std::vector<uint8_t> mmio_read(uint8_t bar, uint64_t offset, uint32_t len) {
    auto r = mmio_read_for(bar, offset, len, -1);
    return r ? *r : all_ones(len);
  }

  uint32_t mmio_read32(uint8_t bar, uint64_t offset) {
    auto b = mmio_read(bar, offset, 4);
    return get_u32le(b.data());
  }
  uint64_t mmio_read64(uint8_t bar, uint64_t offset) {
    auto b = mmio_read(bar, offset, 8);
    return get_u64le(b.data());
  }

  // Posted write: no acknowledgment, returns immediately.
  void mmio_write(uint8_t bar, uint64_t offset, std::span<const uint8_t> data) {
    check_access(bar, offset, static_cast<uint32_t>(data.size()));
    stats_.mmio_writes++;
    if (!connected()) {
      log_("mmio write while disconnected: dropped");
      return;
    }
    proto::WireMessage req = proto::MmioWriteReq{
        bar, offset, std::vector<uint8_t>(data.begin(), data.end())};
    checker_.observe(proto::ChannelId::kH2dReq, req);
    if (!ch(proto::ChannelId::kH2dReq).send(req))
      on_disconnect("send failed on H2D_REQ");
  }

  void mmio_write32(uint8_t bar, uint64_t offset, uint32_t v) {
    std::vector<uint8_t> b;
    put_u32le(b, v);
    mmio_write(bar, offset, b);
  }
  void mmio_write64(uint8_t bar, uint64_t offset, uint64_t v) {
    std::vector<uint8_t> b;
    put_u64le(b, v);
    mmio_write(bar, offset, b);
  }

  // --- Event loop ---

  // Drains device-originated requests. With `blocking`, waits until at
  // least one message was handled, the timeout expired, or the session
  // died. Returns the number of messages handled.
  size_t serve_device_requests(bool blocking, int timeout_ms = -1) {
    if (!connected()) return 0;
    pump(proto::ChannelId::kD2hReq);
    size_t n = serve_pending();
    if (n > 0 || !blocking) return n;
    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::milliseconds(timeout_ms < 0 ? 0 : timeout_ms);
    while (n == 0 && connected()) {
      int wait = -1;
      if (timeout_ms >= 0) {
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                        deadline - std::chrono::steady_clock::now())
                        .count();
        if (left <= 0) break;
        wait = static_cast<int>(left);
      }
      wait_and_pump(wait);
      n = serve_pending();
    }
    return n;
  }

 private:
  proto::Channel& ch(proto::ChannelId id) { return channels_->at(id); }

  static std::vector<uint8_t> all_ones(uint32_t len) {
    return std::vector<uint8_t>(len, 0xFF);
  }

  void check_access(uint8_t bar, uint64_t offset, uint32_t len) const {
    const BarRegion* region = cfg_.bar(bar);
    if (!region) throw std::invalid_argument("access to unconfigured BAR");
    if (len != 4 && len != 8) throw std::invalid_argument("MMIO length must be 4 or 8");
    if (offset + len > region->size)
      throw std::invalid_argument("MMIO access beyond BAR size");
  }

  void pump(proto::ChannelId id) {
    if (!connected()) return;
    auto& c = ch(id);
    c.pump();
    if (!c.connected()) on_disconnect("peer closed channel");
  }

  // Waits for readability on the response and request channels, then pumps
  // both. wait_ms < 0 blocks indefinitely.
  void wait_and_pump(int wait_ms) {
    if (!connected()) return;
    pollfd fds[2] = {
        {ch(proto::ChannelId::kH2dResp).fd(), POLLIN, 0},
        {ch(proto::ChannelId::kD2hReq).fd(), POLLIN, 0},
    };
    ::poll(fds, 2, wait_ms);
    pump(proto::ChannelId::kH2dResp);
    pump(proto::ChannelId::kD2hReq);
  }

  // Handles every decoded D2H request. Nested inside blocked MMIO reads.
  size_t serve_pending() {
    if (!connected()) return 0;
    size_t handled = 0;
    for (;;) {
      std::optional<proto::WireMessage> m;
      try {
        m = ch(proto::ChannelId::kD2hReq).pop();
      } catch (const proto::ProtocolError&) {
        on_disconnect("malformed frame on D2H_REQ");
        throw;
      }
      if (!m) return handled;
      checker_.observe(proto::ChannelId::kD2hReq, *m);
      handled++;
      if (auto* r = std::get_if<proto::HostMemReadReq>(&*m))
        serve_mem_read(*r);
      else if (auto* w = std::get_if<proto::HostMemWriteReq>(&*m))
        serve_mem_write(*w);
      else if (auto* i = std::get_if<proto::InterruptReq>(&*m))
        serve_interrupt(*i);
    }
  }

  void serve_mem_read(const proto::HostMemReadReq& r) {
    stats_.served_mem_reads++;
    proto::HostMemReadResp resp;
    resp.tag = r.tag;
    std::vector<uint8_t> data;
    auto status = mem_.read(r.addr, r.len, &data);
    resp.status = static_cast<uint8_t>(status);
    if (status == proto::Status::kOk) resp.data = std::move(data);
    proto::WireMessage m = std::move(resp);
    checker_.observe(proto::ChannelId::kD2hResp, m);
    if (!ch(proto::ChannelId::kD2hResp).send(m))
      on_disconnect("send failed on D2H_RESP");
  }

  void serve_mem_write(const proto::HostMemWriteReq& w) {
    stats_.served_mem_writes++;
    if (mem_.write(w.addr, w.data) != proto::Status::kOk) {
      stats_.mem_write_errors++;  // posted: logged and counted, never fatal
      log_("device write out of range at 0x" + hex(w.addr));
    }
  }

  void serve_interrupt(const proto::InterruptReq& i) {
    if (i.vector >= cfg_.msi_vectors) {
      stats_.spurious_interrupts++;
      return;
    }
    auto it = msi_handlers_.find(i.vector);
    if (it == msi_handlers_.end() || !it->second) {
      stats_.spurious_interrupts++;
      return;
    }
    stats_.interrupts++;
    msi_pending_[i.vector]++;
    it->second();
  }

  void on_disconnect(const std::string& why) {
    if (!channels_) return;
    stats_.disconnects++;
    log_("session lost: " + why);
    drop_session(why);
  }

  void drop_session(const std::string&) {
    if (!channels_) return;
    channels_->close_all();
    channels_.reset();
    checker_.reset_outstanding();
  }

  static std::string hex(uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%llx", static_cast<unsigned long long>(v));
    return buf;
  }

  DeviceConfig cfg_;
  GuestMemory mem_;
  net::Endpoint endpoint_;
  std::optional<proto::HostChannels> channels_;
  proto::ProtocolChecker checker_;
  std::map<uint16_t, std::function<void()>> msi_handlers_;
  std::map<uint16_t, uint64_t> msi_pending_;
  uint32_t next_tag_ = 0;
  Stats stats_;
  std::function<void(const std::string&)> log_;
};

}  // namespace cosim::host
