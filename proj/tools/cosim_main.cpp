// SPDX-License-Identifier: Apache-2.0
//
// cosim: run the device simulator, the host emulator with a scenario, or
// both supervised for one-command end-to-end runs and restart drills.
//
// Exit codes: 0 scenario passed and no protocol errors; 1 scenario failure;
// 2 configuration error; 3 protocol/transport fatal error.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "cosim/dev/device_app.hpp"
#include "cosim/host/pseudo_device.hpp"
#include "cosim/host/scenarios.hpp"
#include "cosim/support/proc.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitScenarioFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitFatal = 3;

cosim::dev::DeviceApp* g_device_app = nullptr;
std::vector<cosim::proc::Child*> g_children;

void on_signal(int) {
  if (g_device_app) g_device_app->request_shutdown();
  for (auto* c : g_children)
    if (c) c->kill_hard();
  if (!g_device_app) ::_exit(130);
}

void install_signal_handlers() {
  struct sigaction sa {};
  sa.sa_handler = on_signal;
  ::sigaction(SIGTERM, &sa, nullptr);
  ::sigaction(SIGINT, &sa, nullptr);
}

std::string self_exe() {
  char buf[4096];
  ssize_t n = ::readlink("/proc/self/exe", buf, sizeof(buf) - 1);
  if (n <= 0) return "cosim";
  buf[n] = '\0';
  return buf;
}

// --- option bundles ---

struct DeviceOpts {
  std::string endpoint = "127.0.0.1:0";
  uint32_t n = 1024;
  uint32_t lanes = 4;
  uint16_t poll_budget = 8;
  bool idle_block = true;
  uint16_t msi_vectors = 32;
  std::string vcd_path;
  std::string log_path;
  uint64_t max_cycles = 0;
};

struct HostOpts {
  std::string endpoint;
  uint64_t mem_mib = 256;
  std::string scenario = "sort";
  uint64_t count = 1;
  uint32_t n = 1024;
  uint64_t seed = 1;
  uint64_t samples = 100;
  int timeout_ms = 30000;
  int connect_timeout_ms = 10000;
  double clock_period_ns = cosim::trace::TimeReport::kDefaultClockPeriodNs;
  std::string json_path;
  bool retry_after_disconnect = false;
};

void add_device_flags(CLI::App* app, DeviceOpts& o, bool with_endpoint = true) {
  if (with_endpoint)
    app->add_option("--endpoint", o.endpoint,
                    "listen address, host:port or a socket path")
        ->envname("COSIM_ENDPOINT");
  app->add_option("--n", o.n, "elements per sort batch (power of two)");
  app->add_option("--lanes", o.lanes, "stream lanes per cycle (power of two)");
  app->add_option("--poll-budget", o.poll_budget,
                  "messages consumed per channel per cycle")
      ->check(CLI::Range(1, 65535));
  app->add_flag("--idle-block,!--no-idle-block", o.idle_block,
                "park when quiescent instead of spinning");
  app->add_option("--msi-vectors", o.msi_vectors, "MSI vectors (1..32)");
  app->add_option("--vcd", o.vcd_path, "write waveforms to this VCD file");
  app->add_option("--log", o.log_path, "write the cycle-stamped event log here");
  app->add_option("--max-cycles", o.max_cycles, "stop after this many cycles (0 = run)");
}

void add_host_flags(CLI::App* app, HostOpts& o, bool standalone = true) {
  if (standalone) {
    app->add_option("--endpoint", o.endpoint, "device address, host:port or socket path")
        ->envname("COSIM_ENDPOINT")
        ->required();
    // In combined mode n comes from the device options instead.
    app->add_option("--n", o.n, "elements per batch (must match the device)");
  }
  app->add_option("--mem-size", o.mem_mib, "guest memory size in MiB");
  app->add_option("--scenario", o.scenario, "sort | rtt")
      ->check(CLI::IsMember({"sort", "rtt"}));
  app->add_option("--count", o.count, "batches per sort job");
  app->add_option("--seed", o.seed, "source data seed");
  app->add_option("--samples", o.samples, "RTT samples");
  app->add_option("--timeout-ms", o.timeout_ms, "scenario wall-clock bound");
  app->add_option("--connect-timeout-ms", o.connect_timeout_ms,
                  "connection retry budget");
  app->add_option("--clock-period-ns", o.clock_period_ns,
                  "modeled device clock period for simulated time");
  app->add_option("--json", o.json_path, "also write the JSON report to this file");
  app->add_flag("--retry-after-disconnect", o.retry_after_disconnect,
                "reconnect and rerun once if the device vanishes mid-scenario");
}

cosim::dev::DeviceAppConfig device_config(const DeviceOpts& o) {
  cosim::dev::DeviceAppConfig cfg;
  cfg.device.endpoint = o.endpoint;
  cfg.device.n = o.n;
  cfg.device.lanes = o.lanes;
  cfg.device.msi_vectors = o.msi_vectors;
  cfg.kernel.poll_budget = o.poll_budget;
  cfg.kernel.idle_block = o.idle_block;
  cfg.kernel.max_cycles = o.max_cycles;
  cfg.vcd_path = o.vcd_path;
  cfg.log_path = o.log_path;
  return cfg;
}

// --- device ---

int cmd_device(const DeviceOpts& o) {
  cosim::dev::DeviceAppConfig cfg = device_config(o);
  if (auto err = cfg.device.validate()) {
    std::fprintf(stderr, "configuration error: %s\n", err->c_str());
    return kExitConfig;
  }
  std::unique_ptr<cosim::dev::DeviceApp> app;
  try {
    app = std::make_unique<cosim::dev::DeviceApp>(cfg);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "cannot start device: %s\n", e.what());
    return kExitFatal;
  }
  g_device_app = app.get();
  install_signal_handlers();
  std::printf("READY %s\n", app->bound().str().c_str());
  std::fflush(stdout);
  uint64_t cycles = app->run();
  std::fprintf(stderr, "[device] stopped at cycle %llu\n",
               static_cast<unsigned long long>(cycles));
  g_device_app = nullptr;
  return app->fatal_error().empty() ? kExitOk : kExitFatal;
}

// --- host ---

cosim::host::ScenarioReport run_scenario(cosim::host::PseudoDevice& dev,
                                         const HostOpts& o) {
  if (o.scenario == "rtt") {
    cosim::host::RttScenarioParams p;
    p.samples = o.samples;
    p.timeout_ms = o.timeout_ms;
    p.clock_period_ns = o.clock_period_ns;
    return cosim::host::measure_mmio_rtt(dev, p);
  }
  cosim::host::SortScenarioParams p;
  p.batch_count = o.count;
  p.n = o.n;
  p.seed = o.seed;
  p.timeout_ms = o.timeout_ms;
  return cosim::host::scenario_sort_offload(dev, p);
}

int cmd_host(const HostOpts& o) {
  cosim::DeviceConfig cfg;
  cfg.n = o.n;
  if (auto err = cfg.validate()) {
    std::fprintf(stderr, "configuration error: %s\n", err->c_str());
    return kExitConfig;
  }
  auto ep = cosim::net::parse_endpoint(o.endpoint);
  if (!ep) {
    std::fprintf(stderr, "configuration error: bad endpoint '%s'\n",
                 o.endpoint.c_str());
    return kExitConfig;
  }

  std::unique_ptr<cosim::host::PseudoDevice> dev;
  try {
    dev = std::make_unique<cosim::host::PseudoDevice>(cfg, o.mem_mib << 20);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  }

  cosim::proto::BackoffPolicy bp;
  bp.total_ms = o.connect_timeout_ms;
  if (!dev->connect(*ep, bp)) {
    std::fprintf(stderr, "cannot connect to device at %s\n", ep->str().c_str());
    return kExitFatal;
  }

  cosim::host::ScenarioReport rep;
  try {
    rep = run_scenario(*dev, o);
    if (!rep.pass && !dev->connected() && o.retry_after_disconnect) {
      std::fprintf(stderr, "[host] scenario lost the device; reconnecting\n");
      cosim::proto::BackoffPolicy rbp;
      rbp.total_ms = o.connect_timeout_ms;
      if (dev->reconnect(rbp)) rep = run_scenario(*dev, o);
    }
  } catch (const cosim::proto::ProtocolError& e) {
    std::fprintf(stderr, "fatal protocol error: %s\n", e.what());
    return kExitFatal;
  }

  std::printf("%s", rep.text().c_str());
  auto doc = rep.to_json();
  if (!o.json_path.empty()) {
    std::ofstream out(o.json_path);
    out << doc.dump(2) << "\n";
  }
  std::printf("%s\n", doc.dump().c_str());
  std::fflush(stdout);
  return rep.pass ? kExitOk : kExitScenarioFail;
}

// --- supervised run ---

std::vector<std::string> device_argv(const DeviceOpts& d, const std::string& exe) {
  std::vector<std::string> v{exe, "device", "--endpoint", d.endpoint,
                             "--n", std::to_string(d.n),
                             "--lanes", std::to_string(d.lanes),
                             "--poll-budget", std::to_string(d.poll_budget),
                             "--msi-vectors", std::to_string(d.msi_vectors)};
  if (!d.idle_block) v.push_back("--no-idle-block");
  if (!d.vcd_path.empty()) {
    v.push_back("--vcd");
    v.push_back(d.vcd_path);
  }
  if (!d.log_path.empty()) {
    v.push_back("--log");
    v.push_back(d.log_path);
  }
  if (d.max_cycles) {
    v.push_back("--max-cycles");
    v.push_back(std::to_string(d.max_cycles));
  }
  return v;
}

std::vector<std::string> host_argv(const HostOpts& h, const std::string& endpoint,
                                   const std::string& exe) {
  std::vector<std::string> v{exe, "host", "--endpoint", endpoint,
                             "--scenario", h.scenario,
                             "--mem-size", std::to_string(h.mem_mib),
                             "--count", std::to_string(h.count),
                             "--n", std::to_string(h.n),
                             "--seed", std::to_string(h.seed),
                             "--samples", std::to_string(h.samples),
                             "--timeout-ms", std::to_string(h.timeout_ms),
                             "--connect-timeout-ms", std::to_string(h.connect_timeout_ms)};
  if (!h.json_path.empty()) {
    v.push_back("--json");
    v.push_back(h.json_path);
  }
  if (h.retry_after_disconnect) v.push_back("--retry-after-disconnect");
  return v;
}

// Starts the device child and waits for its READY line. Returns the bound
// endpoint through *endpoint.
std::optional<cosim::proc::Child> start_device(const DeviceOpts& d,
                                               std::string* endpoint) {
  auto child = cosim::proc::Child::spawn(device_argv(d, self_exe()), true);
  if (!child) return std::nullopt;
  for (int i = 0; i < 300; ++i) {
    auto line = child->read_line(100);
    if (!line) {
      if (!child->alive()) return std::nullopt;
      continue;
    }
    if (line->rfind("READY ", 0) == 0) {
      *endpoint = line->substr(6);
      return child;
    }
    std::printf("%s\n", line->c_str());
  }
  return std::nullopt;
}

int cmd_run(const DeviceOpts& d, const HostOpts& h) {
  install_signal_handlers();
  if (auto err = device_config(d).device.validate()) {
    std::fprintf(stderr, "configuration error: %s\n", err->c_str());
    return kExitConfig;
  }
  std::string ep;
  auto device = start_device(d, &ep);
  if (!device) {
    std::fprintf(stderr, "device failed to start\n");
    return kExitFatal;
  }
  g_children.push_back(&*device);

  auto host = cosim::proc::Child::spawn(host_argv(h, ep, self_exe()), false);
  if (!host) {
    std::fprintf(stderr, "host failed to start\n");
    return kExitFatal;
  }
  g_children.push_back(&*host);

  int host_code = host->wait();
  device->terminate();
  int dev_code = 0;
  if (!device->wait_for(5000, &dev_code)) {
    device->kill_hard();
    device->wait();
  }
  g_children.clear();
  if (host_code == kExitOk && dev_code != kExitOk && dev_code != 128 + SIGTERM)
    return kExitFatal;
  return host_code;
}

// --- restart drill ---

int cmd_restart_drill(const DeviceOpts& d, const HostOpts& h, bool no_kill) {
  install_signal_handlers();
  if (auto err = device_config(d).device.validate()) {
    std::fprintf(stderr, "configuration error: %s\n", err->c_str());
    return kExitConfig;
  }
  if (no_kill) return cmd_run(d, h);

  bool all_ok = true;
  auto report = [&](const char* what, bool ok) {
    std::printf("[drill] %-34s %s\n", what, ok ? "PASS" : "FAIL");
    std::fflush(stdout);
    all_ok = all_ok && ok;
  };

  std::string ep;
  auto device = start_device(d, &ep);
  if (!device) {
    std::fprintf(stderr, "device failed to start\n");
    return kExitFatal;
  }
  g_children.push_back(&*device);

  // Phase 1: kill the host mid-scenario; the device must survive and a
  // fresh scenario must pass.
  {
    HostOpts big = h;
    big.count = std::max<uint64_t>(h.count, 50000 / h.n + 1);
    auto victim = cosim::proc::Child::spawn(host_argv(big, ep, self_exe()), false);
    if (!victim) return kExitFatal;
    ::usleep(300 * 1000);  // well inside the job for any desk-scale device
    victim->kill_hard();
    victim->wait();
    report("host killed mid-scenario", true);
    report("device survived host death", device->alive());

    auto fresh = cosim::proc::Child::spawn(host_argv(h, ep, self_exe()), false);
    if (!fresh) return kExitFatal;
    int code = fresh->wait();
    report("fresh scenario after host restart", code == kExitOk);
  }

  // Phase 2: kill the device while this process plays the host; the host
  // must survive, reconnect, and pass a fresh scenario.
  {
    cosim::DeviceConfig cfg;
    cfg.n = h.n;
    cosim::host::PseudoDevice host_dev(cfg, h.mem_mib << 20);
    auto parsed = cosim::net::parse_endpoint(ep);
    cosim::proto::BackoffPolicy bp;
    bp.total_ms = h.connect_timeout_ms;
    bool connected = parsed && host_dev.connect(*parsed, bp);
    report("host connected for device drill", connected);
    if (connected) {
      device->kill_hard();
      device->wait();
      g_children.clear();
      // Survivor behavior: the blocked read resolves all-ones.
      auto v = host_dev.mmio_read(0, cosim::accel::RegisterFile::kId, 4);
      bool all_ones = v == std::vector<uint8_t>(4, 0xFF);
      report("blocked read resolved all-ones", all_ones);
      report("host survived device death", true);

      DeviceOpts d2 = d;
      d2.endpoint = ep;  // rebind the same address
      std::string ep2;
      auto device2 = start_device(d2, &ep2);
      report("device restarted", device2.has_value());
      if (device2) {
        g_children.push_back(&*device2);
        bool re = host_dev.reconnect(bp);
        report("host reconnected", re);
        if (re) {
          cosim::host::SortScenarioParams p;
          p.batch_count = h.count;
          p.n = h.n;
          p.seed = h.seed;
          p.timeout_ms = h.timeout_ms;
          auto rep = cosim::host::scenario_sort_offload(host_dev, p);
          report("fresh scenario after device restart", rep.pass);
        } else {
          all_ok = false;
        }
        device2->terminate();
        int c;
        device2->wait_for(5000, &c);
      }
    }
  }
  g_children.clear();
  std::printf("[drill] %s\n", all_ok ? "ALL PASS" : "FAILED");
  return all_ok ? kExitOk : kExitScenarioFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"VM/HDL-style PCIe co-simulation: virtual FPGA device, "
               "cycle-driven platform simulation, and a streaming sort offload"};
  app.require_subcommand(1);

  DeviceOpts dev_opts;
  HostOpts host_opts;
  DeviceOpts run_dev;
  HostOpts run_host_opts;
  bool drill_no_kill = false;

  auto* dev_cmd = app.add_subcommand("device", "run the device simulator");
  add_device_flags(dev_cmd, dev_opts);

  auto* host_cmd = app.add_subcommand("host", "connect and run a scenario");
  add_host_flags(host_cmd, host_opts);

  auto* run_cmd = app.add_subcommand("run", "device + host, supervised");
  add_device_flags(run_cmd, run_dev, false);
  add_host_flags(run_cmd, run_host_opts, false);
  run_cmd->add_option("--endpoint", run_dev.endpoint,
                      "listen address (default: ephemeral localhost port)")
      ->envname("COSIM_ENDPOINT");

  auto* drill_cmd = app.add_subcommand(
      "restart-drill", "kill and restart each side mid-run, verify recovery");
  DeviceOpts drill_dev;
  HostOpts drill_host;
  add_device_flags(drill_cmd, drill_dev, false);
  add_host_flags(drill_cmd, drill_host, false);
  drill_cmd->add_option("--endpoint", drill_dev.endpoint, "listen address")
      ->envname("COSIM_ENDPOINT");
  drill_cmd->add_flag("--no-kill", drill_no_kill,
                      "degenerate drill: plain supervised run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (dev_cmd->parsed()) return cmd_device(dev_opts);
    if (host_cmd->parsed()) return cmd_host(host_opts);
    if (run_cmd->parsed()) {
      run_host_opts.n = run_dev.n;  // combined mode shares n
      return cmd_run(run_dev, run_host_opts);
    }
    if (drill_cmd->parsed()) {
      drill_host.n = drill_dev.n;
      return cmd_restart_drill(drill_dev, drill_host, drill_no_kill);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fatal: %s\n", e.what());
    return kExitFatal;
  }
  return kExitConfig;
}
