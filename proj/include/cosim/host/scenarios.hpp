// SPDX-License-Identifier: Apache-2.0
//
// Driver-level scenarios against the sorting offload device: the end-to-end
// sort job and the MMIO read round-trip measurement. Reports carry both a
// human-readable rendering and a machine-readable JSON document.

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "cosim/accel/regfile.hpp"
#include "cosim/host/pseudo_device.hpp"
#include "cosim/trace/time_report.hpp"

namespace cosim::host {

struct ScenarioReport {
  std::string scenario;
  bool pass = false;
  uint64_t batches = 0;
  double wall_us = 0;
  uint64_t device_cycles = 0;
  uint64_t interrupts = 0;
  std::vector<std::string> errors;
  std::vector<bool> batch_pass;

  // RTT extras
  uint64_t samples = 0;
  double rtt_min_us = 0, rtt_median_us = 0, rtt_max_us = 0;
  double rtt_cycles = 0;

  trace::TimeReport times{trace::TimeReport::kDefaultClockPeriodNs};

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["scenario"] = scenario;
    j["pass"] = pass;
    j["batches"] = batches;
    j["wall_us"] = wall_us;
    j["device_cycles"] = device_cycles;
    j["interrupts"] = interrupts;
    j["errors"] = errors;
    if (!batch_pass.empty()) {
      nlohmann::ordered_json bp = nlohmann::ordered_json::array();
      for (bool b : batch_pass) bp.push_back(b);
      j["batch_pass"] = bp;
    }
    if (scenario == "rtt") {
      j["samples"] = samples;
      j["rtt_us"] = {{"min", rtt_min_us}, {"median", rtt_median_us},
                     {"max", rtt_max_us}};
      j["rtt_cycles"] = rtt_cycles;
    }
    if (!times.empty()) j["time_report"] = times.json();
    return j;
  }

  std::string text() const {
    std::string out;
    out += "scenario: " + scenario + "\n";
    out += "result:   " + std::string(pass ? "PASS" : "FAIL") + "\n";
    if (batches) {
      size_t ok = 0;
      for (bool b : batch_pass) ok += b;
      out += "batches:  " + std::to_string(ok) + "/" + std::to_string(batches) +
             " sorted\n";
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "wall:     %.1f us\n", wall_us);
    out += buf;
    out += "cycles:   " + std::to_string(device_cycles) + "\n";
    out += "irqs:     " + std::to_string(interrupts) + "\n";
    for (const auto& e : errors) out += "error:    " + e + "\n";
    if (!times.empty()) out += times.text();
    return out;
  }
};

// Reproducible source data: raw engine draws, byte-identical across runs
// for a fixed seed.
inline std::vector<int32_t> seeded_data(uint64_t seed, size_t count) {
  std::mt19937 rng(static_cast<uint32_t>(seed ^ (seed >> 32)));
  std::vector<int32_t> v(count);
  for (auto& x : v) x = static_cast<int32_t>(rng());
  return v;
}

struct SortScenarioParams {
  uint64_t batch_count = 1;   // k
  uint32_t n = 1024;          // elements per batch
  uint64_t seed = 1;
  int timeout_ms = 30000;
  uint64_t src_addr = 0x100000;
  uint64_t dst_addr = 0;      // 0: placed after the source buffer
};

// Writes k*n seeded integers into guest memory, programs and starts the
// DMA job, services events until the completion interrupt, and verifies
// every destination batch against an in-place comparison-sort oracle.
inline ScenarioReport scenario_sort_offload(PseudoDevice& dev,
                                            const SortScenarioParams& p) {
  using Reg = accel::RegisterFile;
  ScenarioReport rep;
  rep.scenario = "sort";
  rep.batches = p.batch_count;
  auto t0 = std::chrono::steady_clock::now();
  auto deadline = t0 + std::chrono::milliseconds(p.timeout_ms);
  auto fail = [&](const std::string& msg) {
    rep.errors.push_back(msg);
    rep.pass = false;
    rep.wall_us = std::chrono::duration<double, std::micro>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    return rep;
  };

  if (p.batch_count < 1) return fail("batch count must be >= 1");
  if (!dev.connected()) return fail("not connected");
  if (dev.mmio_read32(0, Reg::kId) != Reg::kIdValue)
    return fail("ID register mismatch");
  uint32_t dev_n = dev.mmio_read32(0, Reg::kNElems);
  if (dev_n != p.n)
    return fail("device n=" + std::to_string(dev_n) + " does not match scenario n=" +
                std::to_string(p.n));

  const uint64_t total = p.batch_count * p.n;
  const uint64_t bytes = total * 4;
  if (bytes > std::numeric_limits<uint32_t>::max())
    return fail("job exceeds the 32-bit LEN_BYTES register");
  uint64_t src = p.src_addr;
  uint64_t dst = p.dst_addr ? p.dst_addr : src + bytes + GuestMemory::kPage;
  if (src + bytes > dev.memory().size() || dst + bytes > dev.memory().size())
    return fail("buffers do not fit in guest memory");

  auto data = seeded_data(p.seed, total);
  uint8_t* s = dev.memory().at(src, bytes);
  for (size_t i = 0; i < data.size(); ++i) {
    uint32_t u = static_cast<uint32_t>(data[i]);
    for (int b = 0; b < 4; ++b) s[i * 4 + static_cast<size_t>(b)] =
        static_cast<uint8_t>(u >> (8 * b));
  }
  std::fill_n(dev.memory().at(dst, bytes), bytes, 0);

  uint64_t irqs = 0;
  dev.register_msi_handler(0, [&irqs] { irqs++; });

  uint64_t cycles0 = dev.mmio_read64(0, Reg::kCycles);
  dev.mmio_write64(0, Reg::kSrcAddr, src);
  dev.mmio_write64(0, Reg::kDstAddr, dst);
  dev.mmio_write32(0, Reg::kLenBytes, static_cast<uint32_t>(bytes));
  dev.mmio_write32(0, Reg::kCtrl, 1);

  while (irqs == 0) {
    if (!dev.connected()) return fail("device disconnected mid-job");
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                    deadline - std::chrono::steady_clock::now())
                    .count();
    if (left <= 0) return fail("timeout waiting for completion interrupt");
    dev.serve_device_requests(true, static_cast<int>(std::min<long long>(left, 100)));
  }
  rep.interrupts = irqs;

  uint32_t status = dev.mmio_read32(0, Reg::kStatus);
  uint64_t cycles1 = dev.mmio_read64(0, Reg::kCycles);
  dev.mmio_write32(0, Reg::kIrqAck, 1);
  rep.device_cycles = cycles1 - cycles0;
  if (status & Reg::kStatusError) return fail("device reported STATUS.ERROR");
  if (!(status & Reg::kStatusDone)) return fail("STATUS.DONE not set after interrupt");

  const uint8_t* d = dev.memory().at(dst, bytes);
  rep.pass = true;
  for (uint64_t b = 0; b < p.batch_count; ++b) {
    std::vector<int32_t> expect(data.begin() + static_cast<long>(b * p.n),
                                data.begin() + static_cast<long>((b + 1) * p.n));
    std::sort(expect.begin(), expect.end());
    bool ok = true;
    for (uint32_t i = 0; i < p.n; ++i) {
      int32_t got = static_cast<int32_t>(get_u32le(d + (b * p.n + i) * 4));
      if (got != expect[i]) {
        ok = false;
        break;
      }
    }
    rep.batch_pass.push_back(ok);
    if (!ok) {
      rep.pass = false;
      rep.errors.push_back("batch " + std::to_string(b) + " not sorted");
    }
  }

  rep.wall_us = std::chrono::duration<double, std::micro>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  rep.times.add("Application Execution Time", rep.wall_us, rep.device_cycles);
  return rep;
}

struct RttScenarioParams {
  uint64_t samples = 100;
  int timeout_ms = 30000;
  double clock_period_ns = trace::TimeReport::kDefaultClockPeriodNs;
};

// `samples` MMIO reads of the ID register: wall time per read plus the
// device cycle delta across the run, reported actual-vs-simulated.
inline ScenarioReport measure_mmio_rtt(PseudoDevice& dev,
                                       const RttScenarioParams& p) {
  using Reg = accel::RegisterFile;
  ScenarioReport rep;
  rep.scenario = "rtt";
  rep.samples = p.samples;
  rep.times = trace::TimeReport(p.clock_period_ns);
  auto t0 = std::chrono::steady_clock::now();

  if (p.samples == 0) {
    rep.pass = true;  // vacuous
    return rep;
  }
  if (!dev.connected()) {
    rep.errors.push_back("not connected");
    return rep;
  }

  uint64_t cycles0 = dev.mmio_read64(0, Reg::kCycles);
  std::vector<double> rtts;
  rtts.reserve(p.samples);
  for (uint64_t i = 0; i < p.samples; ++i) {
    auto r0 = std::chrono::steady_clock::now();
    auto val = dev.mmio_read_for(0, Reg::kId, 4, p.timeout_ms);
    auto r1 = std::chrono::steady_clock::now();
    if (!val) {
      rep.errors.push_back("read timed out");
      break;
    }
    if (get_u32le(val->data()) != Reg::kIdValue) {
      rep.errors.push_back("ID register mismatch at sample " + std::to_string(i));
      break;
    }
    if (!dev.connected()) {
      rep.errors.push_back("disconnected during measurement");
      break;
    }
    rtts.push_back(std::chrono::duration<double, std::micro>(r1 - r0).count());
  }
  uint64_t cycles1 = dev.connected() ? dev.mmio_read64(0, Reg::kCycles) : cycles0;
  rep.device_cycles = cycles1 - cycles0;
  rep.wall_us = std::chrono::duration<double, std::micro>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  rep.pass = rtts.size() == p.samples && rep.errors.empty();
  if (!rtts.empty()) {
    std::vector<double> sorted = rtts;
    std::sort(sorted.begin(), sorted.end());
    rep.rtt_min_us = sorted.front();
    rep.rtt_max_us = sorted.back();
    rep.rtt_median_us = sorted[sorted.size() / 2];
    rep.rtt_cycles = static_cast<double>(rep.device_cycles) /
                     static_cast<double>(rtts.size());
    rep.times.add("Host to Device Read RTT", rep.rtt_median_us,
                  rep.device_cycles / rtts.size());
    rep.times.add("Application Execution Time", rep.wall_us, rep.device_cycles);
  }
  return rep;
}

}  // namespace cosim::host
