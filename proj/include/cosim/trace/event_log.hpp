// SPDX-License-Identifier: Apache-2.0
//
// Cycle-stamped structured event log: one JSON record per line, fields
// cycle / dir / type plus the message fields. No wall-clock timestamps by
// default so lockstep replays produce byte-identical files.

#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cosim/proto/wire.hpp"

namespace cosim::trace {

class EventLog {
 public:
  using json = nlohmann::ordered_json;

  explicit EventLog(bool wall_clock = false) : wall_clock_(wall_clock) {}

  // direction: "h2d" for host-sent traffic, "d2h" for device-sent,
  // "internal" for state-transition records.
  void log_message(uint64_t cycle, proto::ChannelId ch,
                   const proto::WireMessage& m, bool outbound) {
    json rec;
    rec["cycle"] = cycle;
    rec["dir"] = outbound ? "d2h" : "h2d";
    rec["type"] = proto::type_name(m);
    rec["channel"] = static_cast<int>(ch);
    append_fields(rec, m);
    push(std::move(rec));
    message_count_++;
  }

  void log_state(uint64_t cycle, const std::string& type, json fields = {}) {
    json rec;
    rec["cycle"] = cycle;
    rec["dir"] = "internal";
    rec["type"] = type;
    for (auto& [k, v] : fields.items()) rec[k] = v;
    push(std::move(rec));
  }

  size_t count() const { return lines_.size(); }
  uint64_t message_count() const { return message_count_; }
  const std::vector<std::string>& lines() const { return lines_; }

  // Writes all records; I/O failure is reported via the return value and
  // never interrupts the simulation.
  bool flush(const std::string& path) const {
    std::ofstream out(path, std::ios::out | std::ios::trunc);
    if (!out.good()) return false;
    for (const auto& l : lines_) out << l << '\n';
    out.flush();
    return out.good();
  }

 private:
  void push(json rec) {
    if (wall_clock_) {
      auto now = std::chrono::duration_cast<std::chrono::nanoseconds>(
          std::chrono::system_clock::now().time_since_epoch());
      rec["wall_ns"] = now.count();
    }
    lines_.push_back(rec.dump());
  }

  static void append_fields(json& rec, const proto::WireMessage& m) {
    struct V {
      json& r;
      void operator()(const proto::Hello& x) {
        r["version"] = x.version;
        r["channel_id"] = x.channel_id;
        r["role"] = x.role;
      }
      void operator()(const proto::MmioReadReq& x) {
        r["bar"] = x.bar;
        r["offset"] = x.offset;
        r["len"] = x.len;
        r["tag"] = x.tag;
      }
      void operator()(const proto::MmioReadResp& x) {
        r["tag"] = x.tag;
        r["status"] = x.status;
        r["len"] = x.data.size();
      }
      void operator()(const proto::MmioWriteReq& x) {
        r["bar"] = x.bar;
        r["offset"] = x.offset;
        r["len"] = x.data.size();
      }
      void operator()(const proto::HostMemReadReq& x) {
        r["addr"] = x.addr;
        r["len"] = x.len;
        r["tag"] = x.tag;
      }
      void operator()(const proto::HostMemReadResp& x) {
        r["tag"] = x.tag;
        r["status"] = x.status;
        r["len"] = x.data.size();
      }
      void operator()(const proto::HostMemWriteReq& x) {
        r["addr"] = x.addr;
        r["len"] = x.data.size();
      }
      void operator()(const proto::InterruptReq& x) { r["vector"] = x.vector; }
    };
    std::visit(V{rec}, m);
  }

  bool wall_clock_;
  std::vector<std::string> lines_;
  uint64_t message_count_ = 0;
};

}  // namespace cosim::trace
