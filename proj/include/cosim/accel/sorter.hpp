// SPDX-License-Identifier: Apache-2.0
//
// Streaming bitonic sorting network. Sorts batches of n signed 32-bit
// integers fed w lanes per cycle, ascending. The network is the classic
// bitonic topology
//
//   for (k = 2; k <= n; k <<= 1)         // merge size
//     for (j = k/2; j >= 1; j >>= 1)     // compare-exchange distance
//
// time-multiplexed over w lanes. A stage with distance j < w compares
// within a beat (one register, 1 cycle). A stage with j >= w compares
// elements j/w beats apart through a delay line of j/w slots, costing
// exactly j/w cycles. Pipeline latency is therefore
//
//   L(n, w) = sum over stages of max(1, j/w)
//
// constant for a fixed (n, w), and consecutive batches stream back to back
// with no drain: batch i+1's first beat may follow batch i's last beat on
// the very next cycle.
//
// Input beats of one batch must be contiguous (one per consecutive cycle).
// A gap inside a batch is a usage error; it is detected and latched in
// usage_error().

#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace cosim::accel {

struct StreamBeat {
  std::vector<int32_t> lanes;
  bool valid = false;
  bool last = false;
};

class StreamingSorter {
 public:
  static constexpr uint32_t kMinN = 4;
  static constexpr uint32_t kMaxN = 65536;

  StreamingSorter(uint32_t n, uint32_t w) : n_(n), w_(w) {
    if (!std::has_single_bit(n) || n < kMinN || n > kMaxN)
      throw std::invalid_argument("sorter: n must be a power of two in [4, 65536]");
    if (!std::has_single_bit(w) || w < 1 || w > n)
      throw std::invalid_argument("sorter: w must be a power of two in [1, n]");
    beats_ = n_ / w_;
    for (uint32_t k = 2; k <= n_; k <<= 1) {
      for (uint32_t j = k >> 1; j >= 1; j >>= 1) {
        Stage s;
        s.k = k;
        s.j = j;
        s.delay = j >= w_ ? j / w_ : 1;
        s.ring.resize(s.delay);
        stages_.push_back(std::move(s));
      }
    }
  }

  uint32_t n() const { return n_; }
  uint32_t lanes() const { return w_; }
  uint32_t beats_per_batch() const { return beats_; }

  uint32_t latency() const {
    uint32_t l = 0;
    for (const auto& s : stages_) l += s.delay;
    return l;
  }

  static uint32_t pipeline_latency(uint32_t n, uint32_t w) {
    uint32_t l = 0;
    for (uint32_t k = 2; k <= n; k <<= 1)
      for (uint32_t j = k >> 1; j >= 1; j >>= 1) l += j >= w ? j / w : 1;
    return l;
  }

  // Presents one input beat for the next step(). At most one per cycle.
  void push(std::span<const int32_t> beat_lanes) {
    if (beat_lanes.size() != w_)
      throw std::invalid_argument("sorter: beat must carry exactly w lanes");
    if (pending_.valid) throw std::logic_error("sorter: two pushes in one cycle");
    pending_.valid = true;
    pending_.beat = in_pos_;
    pending_.lanes.assign(beat_lanes.begin(), beat_lanes.end());
    in_pos_ = (in_pos_ + 1) % beats_;
  }

  // Advances one cycle: consumes the pending input beat (or a gap) and
  // returns the output beat, if one emerges this cycle.
  std::optional<StreamBeat> step() {
    Slot in = std::move(pending_);
    pending_ = Slot{};
    if (!in.valid && in_pos_ != 0) {
      usage_error_ = true;  // gap inside a batch
    }
    if (in.valid) in_flight_++;

    for (auto& s : stages_) in = s.step(std::move(in), w_);

    if (!in.valid) return std::nullopt;
    in_flight_--;
    StreamBeat out;
    out.valid = true;
    out.last = in.beat == beats_ - 1;
    out.lanes = std::move(in.lanes);
    return out;
  }

  // True while any beat is somewhere in the pipeline.
  bool busy() const { return in_flight_ > 0 || pending_.valid; }
  bool usage_error() const { return usage_error_; }

  // Discards everything in flight (aborted job); the next batch starts
  // from a clean pipeline.
  void reset() {
    for (auto& s : stages_) {
      for (auto& slot : s.ring) slot = Slot{};
      s.head = 0;
    }
    pending_ = Slot{};
    in_pos_ = 0;
    in_flight_ = 0;
    usage_error_ = false;
  }

 private:
  struct Slot {
    std::vector<int32_t> lanes;
    uint32_t beat = 0;
    bool valid = false;
  };

  struct Stage {
    uint32_t k = 0;
    uint32_t j = 0;
    uint32_t delay = 1;
    std::vector<Slot> ring;
    size_t head = 0;

    Slot step(Slot in, uint32_t w) {
      Slot out = std::move(ring[head]);
      Slot push;
      if (in.valid) {
        if (j < w) {
          // All pairs land inside the beat.
          for (uint32_t l = 0; l < w; ++l) {
            if ((l & j) != 0) continue;
            uint32_t i = in.beat * w + l;
            bool desc = (i & k) != 0;
            int32_t a = in.lanes[l], b = in.lanes[l | j];
            if (desc ? (a < b) : (a > b)) {
              in.lanes[l] = b;
              in.lanes[l | j] = a;
            }
          }
          push = std::move(in);
        } else if ((in.beat & delay) == 0 || !out.valid) {
          // Low half of a pair waits for its partner. The !out.valid case
          // only happens after a contiguity violation; pass through.
          push = std::move(in);
        } else {
          // `out` is the matching low beat (in.beat - delay), guaranteed
          // valid by batch contiguity.
          bool desc = (((in.beat - delay) * w) & k) != 0;
          for (uint32_t l = 0; l < w; ++l) {
            int32_t a = out.lanes[l], b = in.lanes[l];
            if (desc ? (a < b) : (a > b)) {
              out.lanes[l] = b;
              in.lanes[l] = a;
            }
          }
          push = std::move(in);  // high half, emitted delay cycles from now
        }
      }
      ring[head] = std::move(push);
      head = (head + 1) % delay;
      return out;
    }
  };

  uint32_t n_;
  uint32_t w_;
  uint32_t beats_;
  std::vector<Stage> stages_;
  Slot pending_;
  uint32_t in_pos_ = 0;
  uint64_t in_flight_ = 0;
  bool usage_error_ = false;
};

}  // namespace cosim::accel
