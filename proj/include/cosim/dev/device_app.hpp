// SPDX-License-Identifier: Apache-2.0
//
// Whole device process in one object: socket endpoint, kernel, bridge,
// sorting platform, and optional tracing, assembled in the documented
// evaluation order. The CLI `device` subcommand and the in-process test
// harnesses both run this.

#pragma once

#include <memory>
#include <string>

#include "cosim/accel/platform.hpp"
#include "cosim/config.hpp"
#include "cosim/dev/bridge.hpp"
#include "cosim/dev/endpoint.hpp"
#include "cosim/dev/kernel.hpp"
#include "cosim/trace/tracer.hpp"

namespace cosim::dev {

struct DeviceAppConfig {
  DeviceConfig device;
  SimKernel::Config kernel;
  accel::DmaEngine::Config dma;
  std::string vcd_path;  // empty: waveform tracing off
  std::string log_path;  // empty: event log off
};

class DeviceApp {
 public:
  explicit DeviceApp(const DeviceAppConfig& cfg)
      : cfg_(cfg),
        endpoint_(parse(cfg.device.endpoint)),
        kernel_(cfg.kernel),
        bridge_(endpoint_, SimBridge::Config{cfg.kernel.poll_budget,
                                             cfg.device.msi_vectors}),
        platform_(bridge_, cfg.device.n, cfg.device.lanes, cfg.dma) {
    if (auto err = cfg.device.validate()) throw std::invalid_argument(*err);
    bridge_.map_bar(0, accel::RegisterFile::kBarSize, &platform_.regfile());

    if (!cfg.vcd_path.empty()) {
      vcd_.begin(cfg.vcd_path);
      if (!vcd_.ok()) throw std::runtime_error("cannot open VCD file " + cfg.vcd_path);
    }
    if (!cfg.vcd_path.empty() || !cfg.log_path.empty()) {
      tracer_ = std::make_unique<trace::DeviceTracer>(
          cfg.vcd_path.empty() ? nullptr : &vcd_,
          cfg.log_path.empty() ? nullptr : &log_, bridge_, platform_);
    }

    kernel_.attach(&bridge_);
    platform_.attach(kernel_);
    if (tracer_) kernel_.attach(tracer_.get());

    kernel_.set_idle_wait([this] { idle_wait(); });
  }

  const net::Endpoint& bound() const { return endpoint_.bound(); }
  SimKernel& kernel() { return kernel_; }
  SimBridge& bridge() { return bridge_; }
  accel::SortPlatform& platform() { return platform_; }
  trace::EventLog& event_log() { return log_; }
  const std::string& fatal_error() const { return fatal_; }

  void request_shutdown() { kernel_.request_shutdown(); }

  // Free-runs until shutdown or the configured cycle bound. Channel
  // protocol errors abort the run with a diagnostic. Returns the final
  // cycle count.
  uint64_t run(uint64_t until_cycles = 0) {
    try {
      kernel_.run(until_cycles);
    } catch (const proto::ProtocolError& e) {
      fatal_ = e.what();
      std::fprintf(stderr, "[device] fatal protocol error: %s\n", e.what());
    }
    finalize();
    return kernel_.cycle();
  }

  void finalize() {
    if (finalized_) return;
    finalized_ = true;
    if (!cfg_.vcd_path.empty()) vcd_.end();
    if (!cfg_.log_path.empty() && !log_.flush(cfg_.log_path))
      std::fprintf(stderr, "[device] failed writing event log %s\n",
                   cfg_.log_path.c_str());
  }

 private:
  static net::Endpoint parse(const std::string& s) {
    auto ep = net::parse_endpoint(s);
    if (!ep) throw std::invalid_argument("bad endpoint: " + s);
    return *ep;
  }

  // Parked with the cycle counter frozen; short poll slices keep shutdown
  // requests responsive.
  void idle_wait() {
    while (!kernel_.shutdown_requested()) {
      pollfd fds[5];
      nfds_t n = 0;
      fds[n++] = {endpoint_.server().listener_fd(), POLLIN, 0};
      if (endpoint_.session_live()) {
        for (size_t i = 0; i < proto::kChannelCount; ++i) {
          auto& ch = endpoint_.server().at(static_cast<proto::ChannelId>(i));
          if (ch.connected()) fds[n++] = {ch.fd(), POLLIN, 0};
        }
      }
      if (::poll(fds, n, 50) > 0) return;
    }
  }

  DeviceAppConfig cfg_;
  SocketDeviceEndpoint endpoint_;
  SimKernel kernel_;
  SimBridge bridge_;
  accel::SortPlatform platform_;
  trace::VcdWriter vcd_;
  trace::EventLog log_;
  std::unique_ptr<trace::DeviceTracer> tracer_;
  std::string fatal_;
  bool finalized_ = false;
};

}  // namespace cosim::dev
