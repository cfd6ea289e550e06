// SPDX-License-Identifier: Apache-2.0
//
// Streaming DMA engine. A job reads len_bytes from src in bounded bursts,
// streams the data through the sorter one beat per cycle, and writes the
// sorted output back to dst in order. Fetch, sort, and write-back overlap;
// a batch is staged fully before it enters the sorter so its beats are
// guaranteed contiguous regardless of host-memory read latency.
//
// One interrupt pulse per accepted job, whether it ends COMPLETE or ERROR.
// A failed read completion (address error or disconnect abort) aborts the
// job; nothing more is written to dst.

#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "cosim/accel/regfile.hpp"
#include "cosim/accel/sorter.hpp"
#include "cosim/dev/bus.hpp"
#include "cosim/support/bytes.hpp"

namespace cosim::accel {

class DmaEngine final : public dev::Component {
 public:
  struct Config {
    uint32_t burst_bytes = 64;       // split of host-memory reads/writes
    size_t max_outstanding_reads = 8;
    uint16_t irq_vector = 0;
  };

  enum class State { kIdle, kRunning, kComplete, kError };

  // Sampled by the waveform tracer.
  struct Probe {
    bool in_valid = false;   // beat entered the sorter this cycle
    int32_t in_lane0 = 0;
  };

  DmaEngine(dev::BusMasterPort& port, StreamingSorter& sorter, RegisterFile& reg)
      : DmaEngine(port, sorter, reg, Config{}) {}
  DmaEngine(dev::BusMasterPort& port, StreamingSorter& sorter, RegisterFile& reg,
            Config cfg)
      : port_(port), sorter_(sorter), reg_(reg), cfg_(cfg) {}

  State state() const { return state_; }
  uint64_t jobs_started() const { return jobs_started_; }
  const Probe& probe() const { return probe_; }

  // Called by the register file on an accepted START.
  void start_job(uint64_t src, uint64_t dst, uint32_t len_bytes) {
    epoch_++;
    jobs_started_++;
    state_ = State::kRunning;
    src_ = src;
    dst_ = dst;
    len_ = len_bytes;
    fetch_off_ = 0;
    write_off_ = 0;
    staged_.clear();
    out_bytes_.clear();
    beats_fed_ = 0;
    beats_out_ = 0;
    total_beats_ = (len_bytes / 4) / sorter_.lanes();
  }

  // Sorter output hand-off; runs in the sorter's evaluation slot, consumed
  // by this engine on its next step.
  void on_sorter_output(const StreamBeat& beat) {
    if (state_ != State::kRunning) return;
    for (int32_t v : beat.lanes) put_u32le(out_bytes_, static_cast<uint32_t>(v));
    beats_out_++;
  }

  const char* name() const override { return "dma"; }
  bool quiescent() const override { return state_ != State::kRunning; }

  void step(uint64_t) override {
    probe_ = Probe{};
    if (state_ != State::kRunning) return;
    issue_reads();
    feed_sorter();
    drain_output();
    finish_if_done();
  }

 private:
  void issue_reads() {
    while (fetch_off_ < len_ && port_.can_submit_read() &&
           port_.outstanding_reads() < cfg_.max_outstanding_reads) {
      uint32_t burst = std::min<uint64_t>(cfg_.burst_bytes, len_ - fetch_off_);
      uint64_t epoch = epoch_;
      bool ok = port_.submit_read(
          src_ + fetch_off_, burst, [this, epoch](dev::ReadResult r) {
            if (epoch != epoch_ || state_ != State::kRunning) return;
            if (r.status != dev::BusStatus::kOk) {
              fail_job();
              return;
            }
            for (size_t i = 0; i + 4 <= r.data.size(); i += 4)
              staged_.push_back(static_cast<int32_t>(get_u32le(r.data.data() + i)));
          });
      if (!ok) break;
      fetch_off_ += burst;
    }
  }

  void feed_sorter() {
    const uint32_t w = sorter_.lanes();
    const uint32_t beats_per_batch = sorter_.beats_per_batch();
    bool mid_batch = beats_fed_ % beats_per_batch != 0;
    bool batch_staged = staged_.size() >= sorter_.n();
    if (beats_fed_ == total_beats_) return;
    if (!mid_batch && !batch_staged) return;  // wait for a full batch

    beat_lanes_.clear();
    for (uint32_t l = 0; l < w; ++l) {
      beat_lanes_.push_back(staged_.front());
      staged_.pop_front();
    }
    sorter_.push(beat_lanes_);
    probe_.in_valid = true;
    probe_.in_lane0 = beat_lanes_[0];
    beats_fed_++;
  }

  void drain_output() {
    while (true) {
      bool all_produced = beats_out_ == total_beats_;
      size_t chunk = std::min<size_t>(out_bytes_.size(), cfg_.burst_bytes);
      if (chunk == 0) break;
      if (chunk < cfg_.burst_bytes && !all_produced) break;  // wait for a full burst
      std::vector<uint8_t> data(out_bytes_.begin(),
                                out_bytes_.begin() + static_cast<long>(chunk));
      out_bytes_.erase(out_bytes_.begin(), out_bytes_.begin() + static_cast<long>(chunk));
      port_.submit_write(dst_ + write_off_, data);
      write_off_ += chunk;
    }
  }

  void finish_if_done() {
    if (beats_out_ == total_beats_ && out_bytes_.empty() && total_beats_ > 0 &&
        write_off_ == len_) {
      state_ = State::kComplete;
      reg_.job_complete();
      port_.pulse_irq(cfg_.irq_vector);
    }
  }

  void fail_job() {
    state_ = State::kError;
    staged_.clear();
    out_bytes_.clear();
    sorter_.reset();  // discard the aborted job's in-flight beats
    reg_.job_error();
    port_.pulse_irq(cfg_.irq_vector);
  }

  dev::BusMasterPort& port_;
  StreamingSorter& sorter_;
  RegisterFile& reg_;
  Config cfg_;

  State state_ = State::kIdle;
  uint64_t epoch_ = 0;
  uint64_t jobs_started_ = 0;
  uint64_t src_ = 0, dst_ = 0;
  uint32_t len_ = 0;
  uint64_t fetch_off_ = 0, write_off_ = 0;
  std::deque<int32_t> staged_;
  std::vector<uint8_t> out_bytes_;
  uint64_t beats_fed_ = 0, beats_out_ = 0, total_beats_ = 0;
  std::vector<int32_t> beat_lanes_;
  Probe probe_;
};

}  // namespace cosim::accel
