// SPDX-License-Identifier: Apache-2.0
//
// Lockstep determinism: identical configuration and message schedule must
// produce byte-identical event logs and waveforms, and tracing must not
// change simulation behavior.

#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cosim/trace/tracer.hpp"
#include "tests/support/lockstep_harness.hpp"
#include "tests/support/vcd_parser.hpp"

using namespace cosim;
using cosim::test::LockstepHarness;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct RunArtifacts {
  std::string vcd;
  std::string log;
  uint64_t checker_total = 0;
  uint64_t log_messages = 0;
  std::vector<std::pair<uint64_t, std::string>> message_seq;  // cycle, type
};

// One scripted sort job over the loopback bridge, fully deterministic.
// With `traced` set, writes VCD + event log; otherwise only records the
// message sequence through the bridge hook.
RunArtifacts scripted_run(bool traced, const std::string& tag) {
  const uint32_t n = 64, k = 2;
  LockstepHarness h(n, 4);

  std::string vcd_path = std::string(::testing::TempDir()) + "det_" + tag + ".vcd";
  std::string log_path = std::string(::testing::TempDir()) + "det_" + tag + ".log";

  trace::VcdWriter vcd;
  trace::EventLog log;
  std::unique_ptr<trace::DeviceTracer> tracer;
  RunArtifacts out;

  if (traced) {
    vcd.begin(vcd_path);
    tracer = std::make_unique<trace::DeviceTracer>(&vcd, &log, h.bridge, h.platform);
    h.kernel.attach(tracer.get());
  } else {
    h.bridge.set_message_hook([&out](uint64_t cycle, proto::ChannelId,
                                     const proto::WireMessage& m, bool) {
      out.message_seq.emplace_back(cycle, proto::type_name(m));
    });
  }

  // Deterministic input pattern.
  for (uint32_t i = 0; i < n * k; ++i) {
    uint32_t v = (i * 2654435761u) ^ 0x9E3779B9u;
    for (int b = 0; b < 4; ++b)
      h.host_mem[0x100 + i * 4 + static_cast<size_t>(b)] =
          static_cast<uint8_t>(v >> (8 * b));
  }

  h.mmio_write64(accel::RegisterFile::kSrcAddr, 0x100);
  h.mmio_write64(accel::RegisterFile::kDstAddr, 0x8000);
  h.mmio_write32(accel::RegisterFile::kLenBytes, n * k * 4);
  h.mmio_write32(accel::RegisterFile::kCtrl, 1);
  while (h.irq_messages == 0 && h.kernel.cycle() < 100000) h.step_serviced();
  EXPECT_EQ(h.irq_messages, 1u);
  // A fixed cooldown so both runs sample the same number of cycles.
  h.step_serviced(16);

  if (traced) {
    for (const auto& line : log.lines()) {
      auto rec = nlohmann::json::parse(line);
      if (rec["dir"] != "internal")
        out.message_seq.emplace_back(rec["cycle"].get<uint64_t>(),
                                     rec["type"].get<std::string>());
    }
    vcd.end();
    log.flush(log_path);
    out.vcd = slurp(vcd_path);
    out.log = slurp(log_path);
    std::remove(vcd_path.c_str());
    std::remove(log_path.c_str());
  }
  out.checker_total = h.bridge.checker().total();
  out.log_messages = log.message_count();
  return out;
}

TEST(Determinism, LockstepReplayProducesByteIdenticalArtifacts) {
  auto a = scripted_run(true, "a");
  auto b = scripted_run(true, "b");
  ASSERT_FALSE(a.vcd.empty());
  ASSERT_FALSE(a.log.empty());
  EXPECT_EQ(a.vcd, b.vcd);
  EXPECT_EQ(a.log, b.log);
}

TEST(Determinism, ProducedVcdPassesIndependentParser) {
  auto a = scripted_run(true, "p");
  auto chk = cosim::test::check_vcd(a.vcd);
  EXPECT_TRUE(chk.ok) << chk.error;
  EXPECT_GE(chk.var_count, 17u);
  EXPECT_GT(chk.change_count, 0u);
}

TEST(Determinism, EventLogCountMatchesProtocolChecker) {
  auto a = scripted_run(true, "c");
  EXPECT_GT(a.log_messages, 0u);
  EXPECT_EQ(a.log_messages, a.checker_total);
}

TEST(Determinism, TracingOffDoesNotChangeBehavior) {
  auto traced = scripted_run(true, "t");
  auto untraced = scripted_run(false, "u");
  EXPECT_EQ(traced.checker_total, untraced.checker_total);
  ASSERT_EQ(traced.message_seq.size(), untraced.message_seq.size());
  EXPECT_EQ(traced.message_seq, untraced.message_seq);
}

}  // namespace
