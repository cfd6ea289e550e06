// SPDX-License-Identifier: Apache-2.0
//
// Device-side bus port contracts. The platform talks to the outside world
// only through these interfaces; whether a simulation bridge or an
// in-process fake backs them is not observable from the platform side.
//
// Timing rules, identical for every backing:
//   - completion callbacks run >= 1 cycle after submission (no zero-time
//     combinational loop through the port);
//   - read completions for one initiator arrive in submission order;
//   - the interrupt input is a per-cycle pulse: pulses on consecutive
//     cycles merge into one event (edge-triggered), pulses separated by an
//     idle cycle are distinct events.

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "cosim/dev/kernel.hpp"

namespace cosim::dev {

enum class BusStatus : uint8_t {
  kOk = 0,
  kAddressError = 1,
  kDisconnectAbort = 2,
};

struct ReadResult {
  BusStatus status = BusStatus::kOk;
  std::vector<uint8_t> data;
};

using ReadCallback = std::function<void(ReadResult)>;
using WriteCallback = std::function<void(BusStatus)>;

// Master path: platform-initiated access to host memory, plus the
// interrupt pin.
class BusMasterPort {
 public:
  virtual ~BusMasterPort() = default;

  // False when the port cannot accept another read right now (outstanding
  // limit); the caller retries on a later cycle.
  virtual bool submit_read(uint64_t addr, uint32_t len, ReadCallback done) = 0;
  virtual bool can_submit_read() const = 0;

  // Posted write: completes locally; `done` (optional) reports acceptance,
  // not remote status.
  virtual void submit_write(uint64_t addr, std::span<const uint8_t> data,
                            WriteCallback done = {}) = 0;

  // Drives the interrupt pin high for the current cycle.
  virtual void pulse_irq(uint16_t vector) = 0;

  virtual size_t outstanding_reads() const = 0;
};

// Slave path: MMIO transactions the bridge drives into the platform.
class MmioTarget {
 public:
  virtual ~MmioTarget() = default;
  virtual void mmio_read(uint64_t offset, uint32_t len, ReadCallback done) = 0;
  virtual void mmio_write(uint64_t offset, std::span<const uint8_t> data) = 0;
};

// In-process BusMasterPort backing: a flat memory with a fixed completion
// latency. Stands in for the simulation bridge in platform-only tests and
// doubles as the reference for the port's timing rules.
class FakeBusPort final : public BusMasterPort, public Component {
 public:
  struct IrqEvent {
    uint64_t cycle;
    uint16_t vector;
  };

  explicit FakeBusPort(size_t mem_size, uint32_t latency_cycles = 1,
                       uint16_t vector_count = 32)
      : mem_(mem_size, 0), latency_(latency_cycles), vector_count_(vector_count) {}

  std::vector<uint8_t>& memory() { return mem_; }

  const char* name() const override { return "fake_bus_port"; }

  void step(uint64_t cycle) override {
    cycle_ = cycle;
    while (!pending_.empty() && pending_.front().due <= cycle) {
      Op op = std::move(pending_.front());
      pending_.pop_front();
      if (op.is_read) {
        ReadResult r;
        if (in_range(op.addr, op.len)) {
          r.status = BusStatus::kOk;
          r.data.assign(mem_.begin() + static_cast<long>(op.addr),
                        mem_.begin() + static_cast<long>(op.addr + op.len));
        } else {
          r.status = BusStatus::kAddressError;
        }
        outstanding_--;
        if (op.read_done) op.read_done(std::move(r));
      } else {
        if (op.write_done) op.write_done(op.write_status);
      }
    }
  }

  bool quiescent() const override { return pending_.empty(); }

  bool submit_read(uint64_t addr, uint32_t len, ReadCallback done) override {
    if (!can_submit_read()) return false;
    Op op;
    op.is_read = true;
    op.addr = addr;
    op.len = len;
    op.read_done = std::move(done);
    op.due = cycle_ + latency_;
    pending_.push_back(std::move(op));
    outstanding_++;
    reads_submitted_++;
    return true;
  }

  bool can_submit_read() const override {
    return outstanding_ < 64;
  }

  void submit_write(uint64_t addr, std::span<const uint8_t> data,
                    WriteCallback done) override {
    Op op;
    op.is_read = false;
    op.due = cycle_ + latency_;
    if (in_range(addr, static_cast<uint32_t>(data.size()))) {
      std::copy(data.begin(), data.end(), mem_.begin() + static_cast<long>(addr));
      op.write_status = BusStatus::kOk;
    } else {
      op.write_status = BusStatus::kAddressError;
      dropped_writes_++;
    }
    op.write_done = std::move(done);
    pending_.push_back(std::move(op));
  }

  void pulse_irq(uint16_t vector) override {
    if (vector >= vector_count_) {
      dropped_irqs_++;
      return;
    }
    auto& last = last_pulse_[vector];
    bool held = last.has_pulse && last.cycle + 1 == cycle_;
    last = {true, cycle_};
    if (held) return;  // level held across cycles: one event
    irq_events_.push_back({cycle_, vector});
  }

  size_t outstanding_reads() const override { return outstanding_; }

  const std::vector<IrqEvent>& irq_events() const { return irq_events_; }
  uint64_t irq_count(uint16_t vector) const {
    uint64_t n = 0;
    for (const auto& e : irq_events_)
      if (e.vector == vector) n++;
    return n;
  }
  uint64_t dropped_irqs() const { return dropped_irqs_; }
  uint64_t dropped_writes() const { return dropped_writes_; }
  uint64_t reads_submitted() const { return reads_submitted_; }

 private:
  struct Op {
    bool is_read = false;
    uint64_t addr = 0;
    uint32_t len = 0;
    uint64_t due = 0;
    ReadCallback read_done;
    WriteCallback write_done;
    BusStatus write_status = BusStatus::kOk;
  };
  struct PulseState {
    bool has_pulse = false;
    uint64_t cycle = 0;
  };

  bool in_range(uint64_t addr, uint32_t len) const {
    return len > 0 && addr <= mem_.size() && mem_.size() - addr >= len;
  }

  std::vector<uint8_t> mem_;
  uint32_t latency_;
  uint16_t vector_count_;
  uint64_t cycle_ = 0;
  std::deque<Op> pending_;
  size_t outstanding_ = 0;
  std::unordered_map<uint16_t, PulseState> last_pulse_;
  std::vector<IrqEvent> irq_events_;
  uint64_t dropped_irqs_ = 0;
  uint64_t dropped_writes_ = 0;
  uint64_t reads_submitted_ = 0;
};

}  // namespace cosim::dev
