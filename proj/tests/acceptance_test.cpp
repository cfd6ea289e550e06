// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: every release criterion as one test, with a pass/fail
// line per criterion. Criterion 1 and 5 drive the installed CLI binary
// (COSIM_BIN environment variable, set by CTest); the rest run in-process.

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cosim/host/pseudo_device.hpp"
#include "cosim/host/scenarios.hpp"
#include "cosim/support/proc.hpp"
#include "cosim/trace/tracer.hpp"
#include "tests/support/device_thread.hpp"
#include "tests/support/fake_harness.hpp"
#include "tests/support/lockstep_harness.hpp"
#include "tests/support/msg_gen.hpp"
#include "tests/support/nested_target.hpp"
#include "tests/support/vcd_parser.hpp"

using namespace cosim;
using cosim::accel::RegisterFile;

namespace {

std::string cosim_bin() {
  const char* p = std::getenv("COSIM_BIN");
  return p ? p : "./tools/cosim";
}

std::string tmp_file(const std::string& name) {
  return std::string(::testing::TempDir()) + "acc_" + name;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(std::vector<std::string> args, int timeout_ms = 120000) {
  args.insert(args.begin(), cosim_bin());
  auto child = proc::Child::spawn(args, false);
  if (!child) return -1;
  int code = -1;
  if (!child->wait_for(timeout_ms, &code)) {
    child->kill_hard();
    return -2;
  }
  return code;
}

// --- 1. End-to-end offload through the real CLI ---

TEST(Criterion1, EndToEndSortOffloadCli) {
  auto json_path = tmp_file("c1.json");
  auto t0 = std::chrono::steady_clock::now();
  int code = run_cli({"run", "--scenario", "sort", "--n", "1024", "--lanes", "4",
                      "--count", "3", "--seed", "42", "--json", json_path},
                     60000);
  auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                  .count();
  ASSERT_EQ(code, 0);
  EXPECT_LT(secs, 60.0);
  auto doc = nlohmann::json::parse(slurp(json_path));
  EXPECT_EQ(doc["pass"], true);
  EXPECT_EQ(doc["batches"], 3);
  EXPECT_EQ(doc["interrupts"], 1);
  ASSERT_EQ(doc["batch_pass"].size(), 3u);
  for (const auto& b : doc["batch_pass"]) EXPECT_EQ(b, true);
  std::remove(json_path.c_str());
}

// --- 2. Sorter oracle equivalence, >= 1000 randomized batches ---

TEST(Criterion2, SorterOracleEquivalence) {
  std::mt19937 rng(20240811);
  auto random_batch = [&rng](uint32_t n) {
    std::vector<int32_t> v(n);
    for (auto& x : v) {
      switch (rng() % 8) {
        case 0: x = std::numeric_limits<int32_t>::min(); break;
        case 1: x = std::numeric_limits<int32_t>::max(); break;
        case 2: x = static_cast<int32_t>(rng() % 8); break;
        default: x = static_cast<int32_t>(rng()); break;
      }
    }
    return v;
  };

  uint64_t batches_checked = 0;
  for (uint32_t n : {4u, 8u, 64u, 256u, 1024u}) {
    for (uint32_t w : {1u, 2u, 4u, 8u}) {
      if (w > n) continue;
      accel::StreamingSorter s(n, w);
      const uint32_t beats = s.beats_per_batch();
      const int kBatches = 55;
      std::vector<std::vector<int32_t>> in;
      for (int b = 0; b < kBatches; ++b) in.push_back(random_batch(n));

      size_t batch_in = 0, beat_in = 0, batch_out = 0;
      std::vector<int32_t> current;
      uint64_t guard = 0;
      while (batch_out < in.size()) {
        ASSERT_LT(guard++, 100'000'000u);
        if (batch_in < in.size()) {
          s.push(std::span<const int32_t>(in[batch_in].data() + beat_in * w, w));
          if (++beat_in == beats) {
            beat_in = 0;
            batch_in++;
          }
        }
        if (auto out = s.step()) {
          current.insert(current.end(), out->lanes.begin(), out->lanes.end());
          if (out->last) {
            auto expect = in[batch_out];
            std::sort(expect.begin(), expect.end());
            ASSERT_EQ(current, expect) << "n=" << n << " w=" << w;
            current.clear();
            batch_out++;
            batches_checked++;
          }
        }
      }
    }
  }
  EXPECT_GE(batches_checked, 1000u);
}

// --- 3. Fixed latency, zero tolerance, and exact full pipelining ---

TEST(Criterion3, FixedLatencyAndFullPipelining) {
  std::mt19937 rng(33);
  for (uint32_t n : {8u, 64u, 256u, 1024u}) {
    for (uint32_t w : {1u, 2u, 4u, 8u}) {
      if (w > n) continue;
      accel::StreamingSorter s(n, w);
      const uint32_t beats = s.beats_per_batch();
      const uint64_t k = 7;
      const uint32_t L = s.latency();

      uint64_t cycle = 0, first_in = 0, last_out = 0;
      std::vector<uint64_t> first_out_delay;
      size_t batch_in = 0, beat_in = 0, batch_out = 0;
      bool saw_first_beat_of_out = false;
      std::vector<uint64_t> batch_first_in;
      while (batch_out < k) {
        ASSERT_LT(cycle, 100'000'000u);
        if (batch_in < k) {
          if (beat_in == 0) batch_first_in.push_back(cycle);
          std::vector<int32_t> lanes(w);
          for (auto& x : lanes) x = static_cast<int32_t>(rng());
          s.push(lanes);
          if (++beat_in == beats) {
            beat_in = 0;
            batch_in++;
          }
        }
        if (auto out = s.step()) {
          if (!saw_first_beat_of_out) {
            first_out_delay.push_back(cycle - batch_first_in[batch_out]);
            saw_first_beat_of_out = true;
          }
          if (out->last) {
            last_out = cycle;
            batch_out++;
            saw_first_beat_of_out = false;
          }
        }
        cycle++;
      }
      first_in = batch_first_in[0];
      for (uint64_t d : first_out_delay) ASSERT_EQ(d, L) << "n=" << n << " w=" << w;
      ASSERT_EQ(last_out - first_in + 1, L + k * beats) << "n=" << n << " w=" << w;
    }
  }
}

// --- 4. Protocol codec round-trip and fragmented delivery ---

TEST(Criterion4, CodecRoundTripAndFragmentation) {
  cosim::test::MessageGen gen(0xC0DEC);
  proto::FrameDecoder dec;
  const int kMessages = 100000;
  for (int i = 0; i < kMessages; ++i) {
    auto m = gen.any();
    dec.feed(proto::encode_frame(m));
    auto back = dec.next();
    ASSERT_TRUE(back.has_value()) << i;
    ASSERT_EQ(*back, m) << i;
  }
  ASSERT_EQ(dec.buffered(), 0u);

  // Fragmented delivery: byte-at-a-time decoding yields the identical
  // message sequence.
  cosim::test::MessageGen gen2(0xF7A6);
  std::vector<proto::WireMessage> sent;
  std::vector<uint8_t> wire;
  for (int i = 0; i < 500; ++i) {
    auto m = gen2.any();
    auto f = proto::encode_frame(m);
    wire.insert(wire.end(), f.begin(), f.end());
    sent.push_back(std::move(m));
  }
  proto::FrameDecoder frag;
  std::vector<proto::WireMessage> got;
  for (uint8_t b : wire) {
    frag.feed(std::span<const uint8_t>(&b, 1));
    while (auto m = frag.next()) got.push_back(std::move(*m));
  }
  ASSERT_EQ(got.size(), sent.size());
  for (size_t i = 0; i < sent.size(); ++i) ASSERT_EQ(got[i], sent[i]) << i;
}

// --- 5. Restart independence via the CLI drill ---

TEST(Criterion5, RestartDrillsBothVictims) {
  int code = run_cli({"restart-drill", "--n", "256", "--lanes", "4", "--count",
                      "2", "--seed", "7"},
                     120000);
  EXPECT_EQ(code, 0);
}

// --- 6 & 7. Lockstep determinism; trace validity ---

struct LockstepArtifacts {
  std::string vcd;
  std::string log;
  uint64_t messages = 0;
  uint64_t checker_total = 0;
};

LockstepArtifacts lockstep_traced_run(const std::string& tag) {
  const uint32_t n = 64, k = 3;
  cosim::test::LockstepHarness h(n, 4);
  auto vcd_path = tmp_file("c6_" + tag + ".vcd");
  auto log_path = tmp_file("c6_" + tag + ".log");
  trace::VcdWriter vcd;
  vcd.begin(vcd_path);
  trace::EventLog log;
  trace::DeviceTracer tracer(&vcd, &log, h.bridge, h.platform);
  h.kernel.attach(&tracer);

  for (uint32_t i = 0; i < n * k; ++i) {
    uint32_t v = i * 2246822519u + 374761393u;
    for (int b = 0; b < 4; ++b)
      h.host_mem[0x400 + i * 4 + static_cast<size_t>(b)] =
          static_cast<uint8_t>(v >> (8 * b));
  }
  h.mmio_write64(RegisterFile::kSrcAddr, 0x400);
  h.mmio_write64(RegisterFile::kDstAddr, 0x10000);
  h.mmio_write32(RegisterFile::kLenBytes, n * k * 4);
  h.mmio_write32(RegisterFile::kCtrl, 1);
  while (h.irq_messages == 0 && h.kernel.cycle() < 100000) h.step_serviced();
  EXPECT_EQ(h.irq_messages, 1u);
  h.step_serviced(32);

  vcd.end();
  log.flush(log_path);
  LockstepArtifacts a;
  a.vcd = slurp(vcd_path);
  a.log = slurp(log_path);
  a.messages = log.message_count();
  a.checker_total = h.bridge.checker().total();
  std::remove(vcd_path.c_str());
  std::remove(log_path.c_str());
  return a;
}

TEST(Criterion6, LockstepRunsAreByteIdentical) {
  auto a = lockstep_traced_run("a");
  auto b = lockstep_traced_run("b");
  ASSERT_FALSE(a.vcd.empty());
  ASSERT_FALSE(a.log.empty());
  EXPECT_EQ(a.vcd, b.vcd);
  EXPECT_EQ(a.log, b.log);
}

TEST(Criterion7, TraceValidity) {
  // Lockstep artifacts.
  auto a = lockstep_traced_run("v");
  auto chk = cosim::test::check_vcd(a.vcd);
  EXPECT_TRUE(chk.ok) << chk.error;
  EXPECT_EQ(a.messages, a.checker_total);

  // Free-run artifacts from the real CLI.
  auto vcd_path = tmp_file("c7.vcd");
  auto log_path = tmp_file("c7.log");
  int code = run_cli({"run", "--scenario", "sort", "--n", "64", "--lanes", "4",
                      "--count", "2", "--seed", "3", "--vcd", vcd_path, "--log",
                      log_path},
                     60000);
  ASSERT_EQ(code, 0);
  auto cli_vcd = slurp(vcd_path);
  auto chk2 = cosim::test::check_vcd(cli_vcd);
  EXPECT_TRUE(chk2.ok) << chk2.error;
  EXPECT_GT(chk2.change_count, 0u);
  // Every line of the event log is a well-formed record with a cycle.
  std::istringstream log_in(slurp(log_path));
  std::string line;
  size_t records = 0;
  uint64_t last_cycle = 0;
  while (std::getline(log_in, line)) {
    auto rec = nlohmann::json::parse(line);
    ASSERT_TRUE(rec.contains("cycle"));
    uint64_t c = rec["cycle"].get<uint64_t>();
    ASSERT_GE(c, last_cycle);  // non-decreasing cycle order
    last_cycle = c;
    records++;
  }
  EXPECT_GT(records, 0u);
  std::remove(vcd_path.c_str());
  std::remove(log_path.c_str());
}

// --- 8. Deadlock freedom: nested servicing within a bounded cycle count ---

TEST(Criterion8, NestedServicingBoundedCycles) {
  cosim::test::NestedDeviceThread dev(0x3000);
  DeviceConfig cfg;
  cfg.n = 8;
  host::PseudoDevice host(cfg, 1 << 20);
  host.set_logger([](const std::string&) {});
  ASSERT_TRUE(host.connect(dev.endpoint.bound()));
  std::vector<uint8_t> marker{0x11, 0x22, 0x33, 0x44};
  host.memory().write(0x3000, marker);

  auto read_cycle = [&] {
    auto v = host.mmio_read(0, 0x8, 8);
    return get_u64le(v.data());
  };
  uint64_t c0 = read_cycle();
  auto got = host.mmio_read_for(0, 0x0, 4, 30000);
  uint64_t c1 = read_cycle();
  ASSERT_TRUE(got.has_value());
  EXPECT_EQ(*got, marker);
  EXPECT_LE(c1 - c0, 10000u) << "nested completion took too many device cycles";
}

// --- 9. Table-shaped actual-vs-simulated report from the RTT scenario ---

TEST(Criterion9, RttReportShape) {
  cosim::test::DeviceThread dev(8, 4);
  DeviceConfig cfg;
  cfg.n = 8;
  cfg.lanes = 4;
  host::PseudoDevice host(cfg, 1 << 20);
  host.set_logger([](const std::string&) {});
  ASSERT_TRUE(host.connect(dev.endpoint()));
  host::RttScenarioParams p;
  p.samples = 100;
  auto rep = host::measure_mmio_rtt(host, p);
  ASSERT_TRUE(rep.pass) << rep.text();  // 100 reads, each returned the ID value

  bool found = false;
  for (const auto& row : rep.times.rows()) {
    if (row.label == "Host to Device Read RTT") {
      found = true;
      EXPECT_GT(row.simulated_us, 0.0);
    }
  }
  EXPECT_TRUE(found);
  auto text = rep.text();
  EXPECT_NE(text.find("Actual"), std::string::npos);
  EXPECT_NE(text.find("Simulated"), std::string::npos);
  EXPECT_NE(text.find("Host to Device Read RTT"), std::string::npos);
}

// --- 10. Backing opacity: one accelerator battery, two backings ---

struct AccelDriver {
  std::function<std::vector<uint8_t>(uint64_t, uint32_t)> mmio_read;
  std::function<void(uint64_t, const std::vector<uint8_t>&)> mmio_write;
  std::function<void(uint64_t, std::vector<uint8_t>)> mem_write;
  std::function<std::vector<uint8_t>(uint64_t, uint32_t)> mem_read;
  std::function<void()> pump;  // advance simulation + service host side
  std::function<uint64_t()> irq_count;
  uint64_t mem_size = 0;
};

uint32_t drv_read32(AccelDriver& d, uint64_t off) {
  auto b = d.mmio_read(off, 4);
  return get_u32le(b.data());
}
void drv_write32(AccelDriver& d, uint64_t off, uint32_t v) {
  std::vector<uint8_t> b;
  put_u32le(b, v);
  d.mmio_write(off, b);
}
void drv_write64(AccelDriver& d, uint64_t off, uint64_t v) {
  std::vector<uint8_t> b;
  put_u64le(b, v);
  d.mmio_write(off, b);
}

// The accelerator test battery. Runs unchanged against both backings.
void accel_battery(AccelDriver& d, uint32_t n) {
  // Identification and config registers.
  ASSERT_EQ(drv_read32(d, RegisterFile::kId), RegisterFile::kIdValue);
  ASSERT_EQ(drv_read32(d, RegisterFile::kNElems), n);
  ASSERT_EQ(drv_read32(d, 0x100), 0xFFFFFFFFu);

  // A two-batch job sorts correctly and raises exactly one interrupt.
  std::mt19937 rng(77);
  const uint32_t k = 2;
  std::vector<int32_t> input(n * k);
  for (auto& x : input) x = static_cast<int32_t>(rng());
  std::vector<uint8_t> src_bytes;
  for (int32_t v : input) put_u32le(src_bytes, static_cast<uint32_t>(v));
  d.mem_write(0x1000, src_bytes);

  uint64_t irq0 = d.irq_count();
  drv_write64(d, RegisterFile::kSrcAddr, 0x1000);
  drv_write64(d, RegisterFile::kDstAddr, 0x20000);
  drv_write32(d, RegisterFile::kLenBytes, n * k * 4);
  drv_write32(d, RegisterFile::kCtrl, 1);
  for (int i = 0; i < 200000 && d.irq_count() == irq0; ++i) d.pump();
  ASSERT_EQ(d.irq_count(), irq0 + 1);
  ASSERT_TRUE(drv_read32(d, RegisterFile::kStatus) & RegisterFile::kStatusDone);

  auto out_bytes = d.mem_read(0x20000, n * k * 4);
  for (uint32_t b = 0; b < k; ++b) {
    std::vector<int32_t> expect(input.begin() + b * n, input.begin() + (b + 1) * n);
    std::sort(expect.begin(), expect.end());
    for (uint32_t i = 0; i < n; ++i) {
      int32_t got = static_cast<int32_t>(
          get_u32le(out_bytes.data() + (b * n + i) * 4));
      ASSERT_EQ(got, expect[i]) << "batch " << b << " idx " << i;
    }
  }
  drv_write32(d, RegisterFile::kIrqAck, 1);
  ASSERT_EQ(drv_read32(d, RegisterFile::kStatus), 0u);

  // A job reading beyond host memory ends in ERROR with one interrupt and
  // an untouched destination.
  uint64_t irq1 = d.irq_count();
  drv_write64(d, RegisterFile::kSrcAddr, d.mem_size + 0x1000);
  drv_write64(d, RegisterFile::kDstAddr, 0x30000);
  drv_write32(d, RegisterFile::kLenBytes, n * 4);
  drv_write32(d, RegisterFile::kCtrl, 1);
  for (int i = 0; i < 200000 && d.irq_count() == irq1; ++i) d.pump();
  ASSERT_EQ(d.irq_count(), irq1 + 1);
  ASSERT_TRUE(drv_read32(d, RegisterFile::kStatus) & RegisterFile::kStatusError);
  auto dst = d.mem_read(0x30000, n * 4);
  for (uint8_t b : dst) ASSERT_EQ(b, 0);
  drv_write32(d, RegisterFile::kIrqAck, 1);
}

TEST(Criterion10, BackingOpacityFakePort) {
  const uint32_t n = 64;
  cosim::test::FakeHarness h(n, 4);
  AccelDriver d;
  d.mem_size = h.port.memory().size();
  d.mmio_read = [&](uint64_t off, uint32_t len) { return h.read_bytes(off, len); };
  d.mmio_write = [&](uint64_t off, const std::vector<uint8_t>& b) {
    h.platform.regfile().mmio_write(off, b);
    h.settle_write();
  };
  d.mem_write = [&](uint64_t addr, std::vector<uint8_t> b) {
    std::copy(b.begin(), b.end(), h.port.memory().begin() + static_cast<long>(addr));
  };
  d.mem_read = [&](uint64_t addr, uint32_t len) {
    return std::vector<uint8_t>(
        h.port.memory().begin() + static_cast<long>(addr),
        h.port.memory().begin() + static_cast<long>(addr + len));
  };
  d.pump = [&] { h.kernel.step(); };
  d.irq_count = [&] { return h.port.irq_count(0); };
  accel_battery(d, n);
}

TEST(Criterion10, BackingOpacitySimulationBridge) {
  const uint32_t n = 64;
  cosim::test::LockstepHarness h(n, 4);
  AccelDriver d;
  d.mem_size = h.host_mem.size();
  d.mmio_read = [&](uint64_t off, uint32_t len) {
    return h.mmio_read(0, off, len).data;
  };
  d.mmio_write = [&](uint64_t off, const std::vector<uint8_t>& b) {
    h.ep.deliver(proto::ChannelId::kH2dReq, proto::MmioWriteReq{0, off, b});
    h.step_serviced(3);
  };
  d.mem_write = [&](uint64_t addr, std::vector<uint8_t> b) {
    std::copy(b.begin(), b.end(), h.host_mem.begin() + static_cast<long>(addr));
  };
  d.mem_read = [&](uint64_t addr, uint32_t len) {
    return std::vector<uint8_t>(h.host_mem.begin() + static_cast<long>(addr),
                                h.host_mem.begin() + static_cast<long>(addr + len));
  };
  d.pump = [&] { h.step_serviced(); };
  d.irq_count = [&] { return h.irq_messages; };
  accel_battery(d, n);
}

// --- per-criterion result lines ---

class CriterionPrinter : public ::testing::EmptyTestEventListener {
  void OnTestEnd(const ::testing::TestInfo& info) override {
    std::string suite = info.test_suite_name();
    if (suite.rfind("Criterion", 0) != 0) return;
    std::printf("[%s] %s — %s\n", suite.c_str(),
                info.result()->Passed() ? "PASS" : "FAIL", info.name());
    std::fflush(stdout);
  }
};

}  // namespace

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  ::testing::UnitTest::GetInstance()->listeners().Append(new CriterionPrinter);
  return RUN_ALL_TESTS();
}
