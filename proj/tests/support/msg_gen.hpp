// SPDX-License-Identifier: Apache-2.0
//
// Randomized wire-message generator for round-trip and fuzz-style tests.
// Draws every message variant with payload sizes spanning 1..4096.

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cosim/proto/wire.hpp"

namespace cosim::test {

class MessageGen {
 public:
  explicit MessageGen(uint64_t seed) : rng_(seed) {}

  proto::WireMessage any() {
    switch (rng_() % 8) {
      case 0: return hello();
      case 1: return mmio_read_req();
      case 2: return mmio_read_resp();
      case 3: return mmio_write_req();
      case 4: return host_read_req();
      case 5: return host_read_resp();
      case 6: return host_write_req();
      default: return irq();
    }
  }

  proto::Hello hello() {
    return {static_cast<uint16_t>(rng_()), static_cast<uint8_t>(rng_() % 4),
            static_cast<uint8_t>(rng_() % 2)};
  }
  proto::MmioReadReq mmio_read_req() {
    return {static_cast<uint8_t>(rng_() % 6), u64(), len(), tag()};
  }
  proto::MmioReadResp mmio_read_resp() {
    uint8_t status = static_cast<uint8_t>(rng_() % 3);
    return {tag(), status, status == 0 ? payload() : std::vector<uint8_t>{}};
  }
  proto::MmioWriteReq mmio_write_req() {
    return {static_cast<uint8_t>(rng_() % 6), u64(), payload()};
  }
  proto::HostMemReadReq host_read_req() { return {u64(), len(), tag()}; }
  proto::HostMemReadResp host_read_resp() {
    uint8_t status = static_cast<uint8_t>(rng_() % 3);
    return {tag(), status, status == 0 ? payload() : std::vector<uint8_t>{}};
  }
  proto::HostMemWriteReq host_write_req() { return {u64(), payload()}; }
  proto::InterruptReq irq() { return {static_cast<uint16_t>(rng_() % 32)}; }

 private:
  uint64_t u64() { return (static_cast<uint64_t>(rng_()) << 32) | rng_(); }
  uint32_t tag() { return rng_(); }
  uint32_t len() { return 1 + rng_() % proto::kMaxPayload; }
  std::vector<uint8_t> payload() {
    // Bias toward small payloads but cover the 4 KiB extreme.
    uint32_t n;
    switch (rng_() % 4) {
      case 0: n = 1; break;
      case 1: n = 1 + rng_() % 16; break;
      case 2: n = 1 + rng_() % 512; break;
      default: n = proto::kMaxPayload - rng_() % 8; break;
    }
    std::vector<uint8_t> data(n);
    for (auto& b : data) b = static_cast<uint8_t>(rng_());
    return data;
  }

  std::mt19937 rng_;
};

}  // namespace cosim::test
