// SPDX-License-Identifier: Apache-2.0
//
// BAR0 register file (4 KiB window). Accesses complete in one cycle, one
// per cycle, in arrival order. Registers are 4-byte words; 64-bit fields
// are little-endian split across two words and may be accessed in halves.
//
//   0x00 ID       RO  32  = 0x50C10001
//   0x08 SRC_ADDR RW  64
//   0x10 DST_ADDR RW  64
//   0x18 LEN_BYTES RW 32
//   0x20 CTRL     WO  32  bit0 START
//   0x28 STATUS   RO  32  bit0 BUSY, bit1 DONE, bit2 ERROR
//   0x30 IRQ_ACK  WO  32  write 1 clears DONE/ERROR
//   0x38 CYCLES   RO  64  live kernel cycle
//   0x40 N_ELEMS  RO  32
//   0x44 LANES    RO  32
//   0x48 LATENCY  RO  32
//
// Reads of anything else (and unaligned or odd-length accesses) return
// all-ones; writes there are dropped and counted.

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "cosim/dev/bus.hpp"
#include "cosim/support/bytes.hpp"

namespace cosim::accel {

class RegisterFile final : public dev::MmioTarget, public dev::Component {
 public:
  static constexpr uint64_t kBarSize = 4096;
  static constexpr uint32_t kIdValue = 0x50C10001;

  static constexpr uint64_t kId = 0x00;
  static constexpr uint64_t kSrcAddr = 0x08;
  static constexpr uint64_t kDstAddr = 0x10;
  static constexpr uint64_t kLenBytes = 0x18;
  static constexpr uint64_t kCtrl = 0x20;
  static constexpr uint64_t kStatus = 0x28;
  static constexpr uint64_t kIrqAck = 0x30;
  static constexpr uint64_t kCycles = 0x38;
  static constexpr uint64_t kNElems = 0x40;
  static constexpr uint64_t kLanes = 0x44;
  static constexpr uint64_t kLatency = 0x48;

  static constexpr uint32_t kStatusBusy = 1u << 0;
  static constexpr uint32_t kStatusDone = 1u << 1;
  static constexpr uint32_t kStatusError = 1u << 2;

  RegisterFile(uint32_t n_elems, uint32_t lanes, uint32_t latency)
      : n_elems_(n_elems), lanes_(lanes), latency_(latency) {}

  // Wired by the platform: START with valid job parameters.
  void set_start_handler(std::function<void(uint64_t, uint64_t, uint32_t)> h) {
    on_start_ = std::move(h);
  }
  // Wired by the platform: completion interrupt pulse (used here only for
  // the invalid-job error interrupt; the DMA pulses its own).
  void set_irq_pulse(std::function<void()> p) { irq_pulse_ = std::move(p); }

  // --- MmioTarget ---
  // Submissions happen earlier in the cycle than this component's
  // evaluation slot, so they are stamped as arriving on the cycle after
  // the last one seen here; the 1-cycle access then completes on the
  // following step.

  void mmio_read(uint64_t offset, uint32_t len, dev::ReadCallback done) override {
    pending_.push_back(Txn{true, offset, len, {}, std::move(done), cycle_ + 1, false});
  }

  void mmio_write(uint64_t offset, std::span<const uint8_t> data) override {
    pending_.push_back(Txn{false, offset, static_cast<uint32_t>(data.size()),
                           std::vector<uint8_t>(data.begin(), data.end()), {},
                           cycle_ + 1, false});
  }

  // --- Component: completes at most one access per cycle ---

  const char* name() const override { return "regfile"; }

  void step(uint64_t cycle) override {
    cycle_ = cycle;
    if (pending_.empty() || pending_.front().submit_cycle >= cycle) return;
    Txn t = std::move(pending_.front());
    pending_.pop_front();
    if (t.is_read) {
      dev::ReadResult r;
      r.status = dev::BusStatus::kOk;  // master-abort convention: all-ones, OK
      r.data = read_bytes(t.offset, t.len);
      t.done(std::move(r));
    } else {
      apply_write(t.offset, t.data);
    }
  }

  bool quiescent() const override { return pending_.empty(); }

  // --- DMA-side status transitions ---

  void job_complete() {
    busy_ = false;
    done_ = true;
  }
  void job_error() {
    busy_ = false;
    error_ = true;
  }

  uint32_t status_word() const {
    return (busy_ ? kStatusBusy : 0) | (done_ ? kStatusDone : 0) |
           (error_ ? kStatusError : 0);
  }
  uint64_t dropped_writes() const { return dropped_writes_; }
  uint64_t ignored_starts() const { return ignored_starts_; }
  uint64_t src_addr() const { return src_addr_; }
  uint64_t dst_addr() const { return dst_addr_; }
  uint32_t len_bytes() const { return len_bytes_; }

 private:
  struct Txn {
    bool is_read;
    uint64_t offset;
    uint32_t len;
    std::vector<uint8_t> data;
    dev::ReadCallback done;
    uint64_t submit_cycle;
    bool completed;
  };

  bool aligned(uint64_t offset, uint32_t len) const {
    return (len == 4 || len == 8) && offset % 4 == 0 && offset + len <= kBarSize;
  }

  // Word-granular read; unmapped words read as all-ones.
  std::vector<uint8_t> read_bytes(uint64_t offset, uint32_t len) const {
    std::vector<uint8_t> out(len, 0xFF);
    if (!aligned(offset, len)) return out;
    for (uint32_t i = 0; i < len; i += 4) {
      uint32_t w;
      if (read_word(offset + i, &w)) {
        out[i] = static_cast<uint8_t>(w);
        out[i + 1] = static_cast<uint8_t>(w >> 8);
        out[i + 2] = static_cast<uint8_t>(w >> 16);
        out[i + 3] = static_cast<uint8_t>(w >> 24);
      }
    }
    return out;
  }

  bool read_word(uint64_t off, uint32_t* out) const {
    switch (off) {
      case kId: *out = kIdValue; return true;
      case kSrcAddr: *out = static_cast<uint32_t>(src_addr_); return true;
      case kSrcAddr + 4: *out = static_cast<uint32_t>(src_addr_ >> 32); return true;
      case kDstAddr: *out = static_cast<uint32_t>(dst_addr_); return true;
      case kDstAddr + 4: *out = static_cast<uint32_t>(dst_addr_ >> 32); return true;
      case kLenBytes: *out = len_bytes_; return true;
      case kStatus: *out = status_word(); return true;
      case kCycles: *out = static_cast<uint32_t>(cycle_); return true;
      case kCycles + 4: *out = static_cast<uint32_t>(cycle_ >> 32); return true;
      case kNElems: *out = n_elems_; return true;
      case kLanes: *out = lanes_; return true;
      case kLatency: *out = latency_; return true;
      default: return false;  // includes the write-only CTRL/IRQ_ACK words
    }
  }

  void apply_write(uint64_t offset, const std::vector<uint8_t>& data) {
    if (!aligned(offset, static_cast<uint32_t>(data.size()))) {
      dropped_writes_++;
      return;
    }
    for (size_t i = 0; i < data.size(); i += 4) {
      uint32_t w = get_u32le(data.data() + i);
      if (!write_word(offset + i, w)) dropped_writes_++;
    }
  }

  bool write_word(uint64_t off, uint32_t w) {
    switch (off) {
      case kSrcAddr: set_low(&src_addr_, w); return true;
      case kSrcAddr + 4: set_high(&src_addr_, w); return true;
      case kDstAddr: set_low(&dst_addr_, w); return true;
      case kDstAddr + 4: set_high(&dst_addr_, w); return true;
      case kLenBytes: len_bytes_ = w; return true;
      case kCtrl:
        if (w & 1) handle_start();
        return true;
      case kIrqAck:
        if (w & 1) {
          done_ = false;
          error_ = false;
        }
        return true;
      default: return false;  // RO or unmapped word
    }
  }

  void handle_start() {
    if (busy_) {
      ignored_starts_++;
      return;
    }
    uint32_t batch_bytes = 4 * n_elems_;
    if (len_bytes_ == 0 || len_bytes_ % batch_bytes != 0) {
      done_ = false;
      error_ = true;
      if (irq_pulse_) irq_pulse_();
      return;
    }
    done_ = false;
    error_ = false;
    busy_ = true;
    if (on_start_) on_start_(src_addr_, dst_addr_, len_bytes_);
  }

  static void set_low(uint64_t* v, uint32_t w) {
    *v = (*v & 0xFFFFFFFF00000000ull) | w;
  }
  static void set_high(uint64_t* v, uint32_t w) {
    *v = (*v & 0x00000000FFFFFFFFull) | (static_cast<uint64_t>(w) << 32);
  }

  uint32_t n_elems_;
  uint32_t lanes_;
  uint32_t latency_;
  uint64_t cycle_ = 0;

  uint64_t src_addr_ = 0;
  uint64_t dst_addr_ = 0;
  uint32_t len_bytes_ = 0;
  bool busy_ = false;
  bool done_ = false;
  bool error_ = false;

  std::deque<Txn> pending_;
  uint64_t dropped_writes_ = 0;
  uint64_t ignored_starts_ = 0;

  std::function<void(uint64_t, uint64_t, uint32_t)> on_start_;
  std::function<void()> irq_pulse_;
};

}  // namespace cosim::accel
