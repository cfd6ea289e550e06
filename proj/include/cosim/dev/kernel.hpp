// SPDX-License-Identifier: Apache-2.0
//
// Cycle-driven simulation kernel. Each kernel step advances simulated time
// by exactly one cycle and evaluates the attached components in a fixed,
// documented order:
//
//   (1) bridge channel poll   (2) register file   (3) DMA engine
//   (4) sorter                (5) trace sampling
//
// Components are attached in that order by the platform assembly; the
// kernel evaluates them in attach order every cycle.
//
// Free-run mode steps continuously. When idle blocking is enabled and the
// platform has been quiescent (no in-flight transactions, no buffered
// traffic) for `idle_threshold` consecutive cycles, the kernel parks in the
// configured wait hook with the cycle counter frozen until channel traffic
// or a connection wakes it. Lockstep mode is simply the harness calling
// step() itself, which makes message-arrival cycles fully deterministic.

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace cosim::dev {

class Component {
 public:
  virtual ~Component() = default;
  virtual const char* name() const = 0;
  virtual void step(uint64_t cycle) = 0;
  // True when the component holds no in-flight work. Used for idle blocking.
  virtual bool quiescent() const { return true; }
};

class SimKernel {
 public:
  struct Config {
    uint16_t poll_budget = 8;      // messages consumed per channel per cycle
    bool idle_block = true;
    uint32_t idle_threshold = 1024;
    uint64_t max_cycles = 0;       // 0 = unbounded
  };

  SimKernel() : SimKernel(Config{}) {}
  explicit SimKernel(Config cfg) : cfg_(cfg) {}

  const Config& config() const { return cfg_; }
  uint64_t cycle() const { return cycle_; }

  void attach(Component* c) { components_.push_back(c); }

  // Blocks until channel readiness; installed by the socket endpoint.
  // Called only when the platform is quiescent.
  void set_idle_wait(std::function<void()> wait) { idle_wait_ = std::move(wait); }

  void request_shutdown() { shutdown_ = true; }
  bool shutdown_requested() const { return shutdown_; }

  // One cycle: evaluate every component in attach order, then advance.
  void step() {
    for (auto* c : components_) c->step(cycle_);
    cycle_++;
  }

  // Free-run loop. Returns the final cycle count when a shutdown request,
  // the configured max_cycles bound, or `until_cycles` (0 = unbounded)
  // stops it.
  uint64_t run(uint64_t until_cycles = 0) {
    uint64_t quiet = 0;
    while (!shutdown_) {
      if (until_cycles != 0 && cycle_ >= until_cycles) break;
      if (cfg_.max_cycles != 0 && cycle_ >= cfg_.max_cycles) break;
      step();
      if (cfg_.idle_block && idle_wait_) {
        bool q = true;
        for (auto* c : components_)
          if (!c->quiescent()) {
            q = false;
            break;
          }
        quiet = q ? quiet + 1 : 0;
        if (quiet >= cfg_.idle_threshold) {
          // Cycle counter stays frozen while parked.
          idle_wait_();
          quiet = 0;
        }
      }
    }
    return cycle_;
  }

 private:
  Config cfg_;
  uint64_t cycle_ = 0;
  std::atomic<bool> shutdown_{false};  // settable from a supervising thread
  std::vector<Component*> components_;
  std::function<void()> idle_wait_;
};

}  // namespace cosim::dev
