// SPDX-License-Identifier: Apache-2.0
//
// Lockstep harness: bridge + sorting platform on a loopback endpoint, with
// a deterministic in-test host that services device-originated requests
// from a flat memory. Message-arrival cycles are fully under test control.

#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "cosim/accel/platform.hpp"
#include "cosim/dev/bridge.hpp"
#include "cosim/dev/endpoint.hpp"
#include "cosim/dev/kernel.hpp"
#include "cosim/support/bytes.hpp"

namespace cosim::test {

struct LockstepHarness {
  dev::SimKernel kernel;
  dev::LoopbackEndpoint ep;
  dev::SimBridge bridge;
  accel::SortPlatform platform;

  std::vector<uint8_t> host_mem;
  uint64_t irq_messages = 0;
  uint64_t host_writes = 0;
  uint32_t next_tag = 0;

  LockstepHarness(uint32_t n, uint32_t w, size_t host_mem_size = 1 << 20,
                  dev::SimBridge::Config cfg = {})
      : bridge(ep, cfg), platform(bridge, n, w), host_mem(host_mem_size, 0) {
    bridge.map_bar(0, accel::RegisterFile::kBarSize, &platform.regfile());
    kernel.attach(&bridge);
    platform.attach(kernel);
  }

  // Services everything the device sent on D2H_REQ: memory reads answered
  // from host_mem (next cycle), writes applied immediately, interrupts
  // counted.
  void service_host_requests() {
    while (auto m = ep.take_sent(proto::ChannelId::kD2hReq)) {
      if (auto* r = std::get_if<proto::HostMemReadReq>(&*m)) {
        proto::HostMemReadResp resp;
        resp.tag = r->tag;
        if (r->addr + r->len <= host_mem.size()) {
          resp.status = 0;
          resp.data.assign(host_mem.begin() + static_cast<long>(r->addr),
                           host_mem.begin() + static_cast<long>(r->addr + r->len));
        } else {
          resp.status = static_cast<uint8_t>(proto::Status::kAddressError);
        }
        ep.deliver(proto::ChannelId::kD2hResp, resp);
      } else if (auto* w = std::get_if<proto::HostMemWriteReq>(&*m)) {
        host_writes++;
        if (w->addr + w->data.size() <= host_mem.size())
          std::copy(w->data.begin(), w->data.end(),
                    host_mem.begin() + static_cast<long>(w->addr));
      } else if (std::get_if<proto::InterruptReq>(&*m)) {
        irq_messages++;
      }
    }
  }

  void step_serviced(uint64_t cycles = 1) {
    for (uint64_t i = 0; i < cycles; ++i) {
      kernel.step();
      service_host_requests();
    }
  }

  void mmio_write32(uint64_t off, uint32_t v) {
    std::vector<uint8_t> b;
    put_u32le(b, v);
    ep.deliver(proto::ChannelId::kH2dReq, proto::MmioWriteReq{0, off, b});
  }
  void mmio_write64(uint64_t off, uint64_t v) {
    std::vector<uint8_t> b;
    put_u64le(b, v);
    ep.deliver(proto::ChannelId::kH2dReq, proto::MmioWriteReq{0, off, b});
  }

  // Issues an MMIO read and steps (with host servicing) until the response
  // frame appears. Returns the raw response.
  proto::MmioReadResp mmio_read(uint8_t bar, uint64_t off, uint32_t len,
                                uint64_t max_cycles = 1024) {
    uint32_t tag = next_tag++;
    ep.deliver(proto::ChannelId::kH2dReq, proto::MmioReadReq{bar, off, len, tag});
    for (uint64_t i = 0; i < max_cycles; ++i) {
      step_serviced();
      if (auto m = ep.take_sent(proto::ChannelId::kH2dResp)) {
        auto resp = std::get<proto::MmioReadResp>(*m);
        if (resp.tag != tag) throw std::runtime_error("tag mismatch in harness");
        return resp;
      }
    }
    throw std::runtime_error("mmio read timed out in harness");
  }

  uint32_t mmio_read32(uint64_t off) {
    auto r = mmio_read(0, off, 4);
    return get_u32le(r.data.data());
  }
  uint64_t mmio_read64(uint64_t off) {
    auto r = mmio_read(0, off, 8);
    return get_u64le(r.data.data());
  }
};

}  // namespace cosim::test
