// SPDX-License-Identifier: Apache-2.0
//
// Full-visibility device tracing: samples the platform's architectural
// state into a VCD every cycle (evaluation slot 5) and records every
// bridge message in the structured event log. Tracing off means null
// sinks; sampling never mutates simulation state.

#pragma once

#include "cosim/accel/platform.hpp"
#include "cosim/dev/bridge.hpp"
#include "cosim/dev/kernel.hpp"
#include "cosim/trace/event_log.hpp"
#include "cosim/trace/vcd.hpp"

namespace cosim::trace {

class DeviceTracer final : public dev::Component {
 public:
  // Either sink may be null. Installing the tracer also hooks the bridge's
  // message stream into the event log.
  DeviceTracer(VcdWriter* vcd, EventLog* log, dev::SimBridge& bridge,
               accel::SortPlatform& platform)
      : vcd_(vcd), log_(log), bridge_(bridge), platform_(platform) {
    if (log_) {
      bridge_.set_message_hook([this](uint64_t cycle, proto::ChannelId ch,
                                      const proto::WireMessage& m, bool outbound) {
        log_->log_message(cycle, ch, m, outbound);
      });
    }
    if (vcd_) {
      sig_.clk = vcd_->define("top.kernel.clk", 1);
      sig_.cycle = vcd_->define("top.kernel.cycle", 64, "integer");
      sig_.h2d_req = vcd_->define("top.bridge.h2d_req_valid", 1);
      sig_.h2d_resp = vcd_->define("top.bridge.h2d_resp_valid", 1);
      sig_.d2h_req = vcd_->define("top.bridge.d2h_req_valid", 1);
      sig_.d2h_resp = vcd_->define("top.bridge.d2h_resp_valid", 1);
      sig_.outstanding = vcd_->define("top.bridge.outstanding", 8, "integer");
      sig_.bus_valid = vcd_->define("top.bus.valid", 1);
      sig_.bus_write = vcd_->define("top.bus.write", 1);
      sig_.bus_addr = vcd_->define("top.bus.addr", 64);
      sig_.bus_len = vcd_->define("top.bus.len", 32);
      sig_.dma_state = vcd_->define("top.dma.state", 3, "integer");
      sig_.sort_in_valid = vcd_->define("top.sorter.in_valid", 1);
      sig_.sort_in_lane0 = vcd_->define("top.sorter.in_lane0", 32);
      sig_.sort_out_valid = vcd_->define("top.sorter.out_valid", 1);
      sig_.sort_out_lane0 = vcd_->define("top.sorter.out_lane0", 32);
      sig_.irq = vcd_->define("top.bridge.irq_pin", 1);
    }
  }

  const char* name() const override { return "trace"; }

  void step(uint64_t cycle) override {
    if (log_) log_internal(cycle);
    if (!vcd_) return;
    const auto& p = bridge_.pulses();
    const auto& dp = platform_.dma().probe();
    vcd_->change(cycle, sig_.clk, cycle & 1);
    vcd_->change(cycle, sig_.cycle, cycle);
    vcd_->change(cycle, sig_.h2d_req, p.h2d_req_in);
    vcd_->change(cycle, sig_.h2d_resp, p.h2d_resp_out);
    vcd_->change(cycle, sig_.d2h_req, p.d2h_req_out);
    vcd_->change(cycle, sig_.d2h_resp, p.d2h_resp_in);
    vcd_->change(cycle, sig_.outstanding,
                 static_cast<uint8_t>(bridge_.outstanding_reads()));
    vcd_->change(cycle, sig_.bus_valid, p.bus_valid);
    vcd_->change(cycle, sig_.bus_write, p.bus_is_write);
    vcd_->change(cycle, sig_.bus_addr, p.bus_addr);
    vcd_->change(cycle, sig_.bus_len, p.bus_len);
    vcd_->change(cycle, sig_.dma_state,
                 static_cast<uint64_t>(platform_.dma().state()));
    vcd_->change(cycle, sig_.sort_in_valid, dp.in_valid);
    vcd_->change(cycle, sig_.sort_in_lane0,
                 static_cast<uint32_t>(dp.in_lane0));
    vcd_->change(cycle, sig_.sort_out_valid, platform_.sorter_out_valid());
    vcd_->change(cycle, sig_.sort_out_lane0,
                 static_cast<uint32_t>(platform_.sorter_out_lane0()));
    vcd_->change(cycle, sig_.irq, p.irq);
  }

 private:
  struct Signals {
    VcdWriter::SignalId clk{}, cycle{}, h2d_req{}, h2d_resp{}, d2h_req{},
        d2h_resp{}, outstanding{}, bus_valid{}, bus_write{}, bus_addr{},
        bus_len{}, dma_state{}, sort_in_valid{}, sort_in_lane0{},
        sort_out_valid{}, sort_out_lane0{}, irq{};
  };

  static const char* dma_state_name(accel::DmaEngine::State s) {
    switch (s) {
      case accel::DmaEngine::State::kIdle: return "idle";
      case accel::DmaEngine::State::kRunning: return "running";
      case accel::DmaEngine::State::kComplete: return "complete";
      case accel::DmaEngine::State::kError: return "error";
    }
    return "?";
  }

  // State-transition records, keyed off deterministic simulation state.
  void log_internal(uint64_t cycle) {
    auto st = platform_.dma().state();
    if (st != last_dma_state_) {
      last_dma_state_ = st;
      log_->log_state(cycle, "dma_state", {{"state", dma_state_name(st)}});
    }
    if (bridge_.disconnects() != last_disconnects_) {
      last_disconnects_ = bridge_.disconnects();
      log_->log_state(cycle, "session_disconnect",
                      {{"count", last_disconnects_}});
    }
  }

  VcdWriter* vcd_;
  EventLog* log_;
  dev::SimBridge& bridge_;
  accel::SortPlatform& platform_;
  Signals sig_;
  accel::DmaEngine::State last_dma_state_ = accel::DmaEngine::State::kIdle;
  uint64_t last_disconnects_ = 0;
};

}  // namespace cosim::trace
