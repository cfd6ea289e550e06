// SPDX-License-Identifier: Apache-2.0
//
// PCIe simulation bridge. Device-side counterpart of the host's pseudo
// device: consumes MMIO requests from the H2D request channel and drives
// them into the mapped BAR targets, implements the BusMasterPort for
// platform-initiated host-memory access and interrupts, and owns the
// session recovery rules:
//
//   - inbound MMIO reads produce exactly one response each, in consumption
//     order; reads to unmapped space complete with all-ones and status OK
//     (master-abort convention), unmapped writes are dropped and counted;
//   - outstanding host-memory reads complete DISCONNECT_ABORT when the
//     session dies; the platform keeps running and a fresh handshake
//     restores full operation;
//   - a response tag that does not match the oldest outstanding request is
//     a fatal protocol error.

#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>

#include "cosim/dev/bus.hpp"
#include "cosim/dev/endpoint.hpp"
#include "cosim/dev/kernel.hpp"
#include "cosim/proto/checker.hpp"
#include "cosim/proto/wire.hpp"

namespace cosim::dev {

class SimBridge final : public BusMasterPort, public Component {
 public:
  struct Config {
    uint16_t poll_budget = 8;
    uint16_t msi_vectors = 32;
  };

  // cycle, channel, message, outbound. Installed by the trace layer.
  using MessageHook =
      std::function<void(uint64_t, proto::ChannelId, const proto::WireMessage&, bool)>;

  // Per-cycle activity, sampled by the waveform tracer.
  struct Pulses {
    bool h2d_req_in = false;
    bool h2d_resp_out = false;
    bool d2h_req_out = false;
    bool d2h_resp_in = false;
    bool irq = false;
    bool bus_valid = false;     // master-side submit this cycle
    bool bus_is_write = false;
    uint64_t bus_addr = 0;
    uint32_t bus_len = 0;
  };

  explicit SimBridge(DeviceEndpoint& ep) : SimBridge(ep, Config{}) {}
  SimBridge(DeviceEndpoint& ep, Config cfg) : ep_(ep), cfg_(cfg) {}

  void map_bar(uint8_t bar, uint64_t size, MmioTarget* target) {
    bars_[bar] = BarMapping{size, target};
  }

  void set_message_hook(MessageHook h) { hook_ = std::move(h); }

  const proto::ProtocolChecker& checker() const { return checker_; }
  const Pulses& pulses() const { return pulses_; }

  uint64_t mmio_reads_consumed() const { return mmio_reads_consumed_; }
  uint64_t mmio_resps_sent() const { return mmio_resps_sent_; }
  uint64_t mmio_resps_aborted() const { return mmio_resps_aborted_; }
  uint64_t dropped_writes() const { return dropped_writes_; }
  uint64_t dropped_irqs() const { return dropped_irqs_; }
  uint64_t disconnects() const { return disconnects_; }

  // --- Component (evaluation slot 1: channel poll) ---

  const char* name() const override { return "bridge"; }

  void step(uint64_t cycle) override {
    cycle_ = cycle;
    pulses_ = Pulses{};
    ep_.poll();
    if (ep_.take_disconnect_event()) on_disconnect();
    if (ep_.take_connect_event()) checker_.reset_outstanding();
    run_deferred();
    consume(proto::ChannelId::kH2dReq);
    consume(proto::ChannelId::kD2hResp);
    flush_mmio_queue();
  }

  bool quiescent() const override {
    return outstanding_.empty() && deferred_.empty() && mmio_q_.empty() &&
           !pulses_.h2d_req_in && !pulses_.d2h_resp_in && !pulses_.h2d_resp_out &&
           !pulses_.d2h_req_out;
  }

  // --- BusMasterPort (master path toward host memory) ---

  bool submit_read(uint64_t addr, uint32_t len, ReadCallback done) override {
    if (len == 0 || len > proto::kMaxPayload)
      throw std::logic_error("bridge read burst must be 1..4096 bytes");
    if (!can_submit_read()) return false;
    if (!ep_.session_live()) {
      defer(ReadResult{BusStatus::kDisconnectAbort, {}}, std::move(done));
      return true;
    }
    uint32_t tag = next_tag_++;
    proto::WireMessage m = proto::HostMemReadReq{addr, len, tag};
    if (!send(proto::ChannelId::kD2hReq, m)) {
      defer(ReadResult{BusStatus::kDisconnectAbort, {}}, std::move(done));
      return true;
    }
    outstanding_.push_back({tag, std::move(done)});
    pulses_.bus_valid = true;
    pulses_.bus_is_write = false;
    pulses_.bus_addr = addr;
    pulses_.bus_len = len;
    return true;
  }

  bool can_submit_read() const override {
    return outstanding_.size() + deferred_reads_ < proto::kMaxOutstanding;
  }

  void submit_write(uint64_t addr, std::span<const uint8_t> data,
                    WriteCallback done = {}) override {
    if (data.empty() || data.size() > proto::kMaxPayload)
      throw std::logic_error("bridge write burst must be 1..4096 bytes");
    BusStatus status = BusStatus::kOk;
    if (ep_.session_live()) {
      proto::WireMessage m = proto::HostMemWriteReq{
          addr, std::vector<uint8_t>(data.begin(), data.end())};
      if (!send(proto::ChannelId::kD2hReq, m)) status = BusStatus::kDisconnectAbort;
    } else {
      status = BusStatus::kDisconnectAbort;
    }
    pulses_.bus_valid = true;
    pulses_.bus_is_write = true;
    pulses_.bus_addr = addr;
    pulses_.bus_len = static_cast<uint32_t>(data.size());
    if (done) {
      deferred_.push_back(Deferred{cycle_ + 1, false, {status, {}}, {},
                                   std::move(done)});
    }
  }

  void pulse_irq(uint16_t vector) override {
    if (vector >= cfg_.msi_vectors) {
      dropped_irqs_++;
      return;
    }
    pulses_.irq = true;
    auto& last = irq_pin_[vector];
    bool held = last.driven && last.cycle + 1 == cycle_;
    last = {true, cycle_};
    if (held) return;  // level held across consecutive cycles: one message
    if (ep_.session_live()) {
      proto::WireMessage m = proto::InterruptReq{vector};
      send(proto::ChannelId::kD2hReq, m);
    }
  }

  size_t outstanding_reads() const override { return outstanding_.size(); }

 private:
  struct BarMapping {
    uint64_t size = 0;
    MmioTarget* target = nullptr;
  };

  struct InboundRead {
    uint32_t tag = 0;
    uint64_t enqueue_cycle = 0;
    bool done = false;
    bool aborted = false;
    uint8_t status = 0;
    std::vector<uint8_t> data;
  };

  struct OutstandingRead {
    uint32_t tag;
    ReadCallback done;
  };

  struct Deferred {
    uint64_t due;
    bool is_read;
    ReadResult read_result;
    ReadCallback read_done;
    WriteCallback write_done;
  };

  struct PinState {
    bool driven = false;
    uint64_t cycle = 0;
  };

  bool send(proto::ChannelId ch, const proto::WireMessage& m) {
    if (!ep_.send(ch, m)) return false;
    checker_.observe(ch, m);
    if (hook_) hook_(cycle_, ch, m, true);
    switch (ch) {
      case proto::ChannelId::kH2dResp: pulses_.h2d_resp_out = true; break;
      case proto::ChannelId::kD2hReq: pulses_.d2h_req_out = true; break;
      default: break;
    }
    return true;
  }

  void defer(ReadResult r, ReadCallback done) {
    deferred_.push_back(Deferred{cycle_ + 1, true, std::move(r), std::move(done), {}});
    deferred_reads_++;
  }

  void run_deferred() {
    while (!deferred_.empty() && deferred_.front().due <= cycle_) {
      Deferred d = std::move(deferred_.front());
      deferred_.pop_front();
      if (d.is_read) {
        deferred_reads_--;
        if (d.read_done) d.read_done(std::move(d.read_result));
      } else if (d.write_done) {
        d.write_done(d.read_result.status);
      }
    }
  }

  void consume(proto::ChannelId ch) {
    for (uint16_t i = 0; i < cfg_.poll_budget; ++i) {
      auto m = ep_.pop(ch);
      if (!m) return;
      checker_.observe(ch, *m);
      if (hook_) hook_(cycle_, ch, *m, false);
      if (ch == proto::ChannelId::kH2dReq) {
        pulses_.h2d_req_in = true;
        if (auto* r = std::get_if<proto::MmioReadReq>(&*m)) on_mmio_read(*r);
        else if (auto* w = std::get_if<proto::MmioWriteReq>(&*m)) on_mmio_write(*w);
      } else {
        pulses_.d2h_resp_in = true;
        if (auto* r = std::get_if<proto::HostMemReadResp>(&*m)) on_host_read_resp(*r);
      }
    }
  }

  void on_mmio_read(const proto::MmioReadReq& r) {
    mmio_reads_consumed_++;
    auto entry = std::make_shared<InboundRead>();
    entry->tag = r.tag;
    entry->enqueue_cycle = cycle_;
    mmio_q_.push_back(entry);

    const BarMapping* bar = find_bar(r.bar);
    if (!bar || r.offset + r.len > bar->size) {
      entry->done = true;  // master abort: all-ones, status OK
      entry->status = 0;
      entry->data.assign(r.len, 0xFF);
      return;
    }
    bar->target->mmio_read(r.offset, r.len, [this, entry](ReadResult res) {
      if (entry->aborted) return;
      entry->done = true;
      entry->status = static_cast<uint8_t>(res.status);
      entry->data = std::move(res.data);
      flush_mmio_queue();
    });
  }

  void on_mmio_write(const proto::MmioWriteReq& w) {
    const BarMapping* bar = find_bar(w.bar);
    if (!bar || w.offset + w.data.size() > bar->size) {
      dropped_writes_++;
      return;
    }
    bar->target->mmio_write(w.offset, w.data);
  }

  void on_host_read_resp(proto::HostMemReadResp& r) {
    // The checker already rejected out-of-order or unknown tags.
    OutstandingRead o = std::move(outstanding_.front());
    outstanding_.pop_front();
    ReadResult res;
    res.status = static_cast<BusStatus>(r.status);
    res.data = std::move(r.data);
    if (o.done) o.done(std::move(res));
  }

  // Responses go out in consumption order, each no earlier than the cycle
  // after its request was consumed.
  void flush_mmio_queue() {
    while (!mmio_q_.empty() && mmio_q_.front()->done &&
           mmio_q_.front()->enqueue_cycle < cycle_) {
      auto entry = mmio_q_.front();
      if (!ep_.session_live()) return;  // keep until disconnect handling
      mmio_q_.pop_front();
      proto::WireMessage m = proto::MmioReadResp{
          entry->tag, entry->status, std::move(entry->data)};
      if (send(proto::ChannelId::kH2dResp, m)) mmio_resps_sent_++;
    }
  }

  void on_disconnect() {
    disconnects_++;
    // Pending bus transactions toward the host abort in submission order.
    while (!outstanding_.empty()) {
      OutstandingRead o = std::move(outstanding_.front());
      outstanding_.pop_front();
      if (o.done) o.done(ReadResult{BusStatus::kDisconnectAbort, {}});
    }
    // Inbound MMIO transactions have no channel to answer on; they count
    // as aborted responses.
    for (auto& e : mmio_q_) {
      e->aborted = true;
      mmio_resps_aborted_++;
    }
    mmio_q_.clear();
    checker_.reset_outstanding();
  }

  const BarMapping* find_bar(uint8_t bar) const {
    auto it = bars_.find(bar);
    return it == bars_.end() ? nullptr : &it->second;
  }

  DeviceEndpoint& ep_;
  Config cfg_;
  std::map<uint8_t, BarMapping> bars_;
  MessageHook hook_;
  proto::ProtocolChecker checker_;
  Pulses pulses_;

  uint64_t cycle_ = 0;
  uint32_t next_tag_ = 0;
  std::deque<std::shared_ptr<InboundRead>> mmio_q_;
  std::deque<OutstandingRead> outstanding_;
  std::deque<Deferred> deferred_;
  size_t deferred_reads_ = 0;
  std::map<uint16_t, PinState> irq_pin_;

  uint64_t mmio_reads_consumed_ = 0;
  uint64_t mmio_resps_sent_ = 0;
  uint64_t mmio_resps_aborted_ = 0;
  uint64_t dropped_writes_ = 0;
  uint64_t dropped_irqs_ = 0;
  uint64_t disconnects_ = 0;
};

}  // namespace cosim::dev
