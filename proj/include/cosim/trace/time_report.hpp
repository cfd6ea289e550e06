// SPDX-License-Identifier: Apache-2.0
//
// Actual-vs-simulated time report. Simulated time converts device cycles
// through the modeled clock (default 4 ns/cycle, i.e. 250 MHz).

#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

namespace cosim::trace {

class TimeReport {
 public:
  static constexpr double kDefaultClockPeriodNs = 4.0;

  explicit TimeReport(double clock_period_ns = kDefaultClockPeriodNs)
      : period_ns_(clock_period_ns) {}

  static double cycles_to_us(uint64_t cycles, double period_ns) {
    return static_cast<double>(cycles) * period_ns / 1000.0;
  }

  void add(const std::string& label, double actual_us, uint64_t cycles) {
    rows_.push_back({label, actual_us, cycles_to_us(cycles, period_ns_), cycles});
  }

  std::string text() const {
    if (rows_.empty()) return "";
    size_t label_w = 0;
    for (const auto& r : rows_) label_w = std::max(label_w, r.label.size());
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-*s  %16s  %16s\n",
                  static_cast<int>(label_w), "", "Actual (us)", "Simulated (us)");
    out += buf;
    for (const auto& r : rows_) {
      std::snprintf(buf, sizeof(buf), "%-*s  %16.3f  %16.3f\n",
                    static_cast<int>(label_w), r.label.c_str(), r.actual_us,
                    r.simulated_us);
      out += buf;
    }
    return out;
  }

  nlohmann::ordered_json json() const {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : rows_) {
      rows.push_back({{"label", r.label},
                      {"actual_us", r.actual_us},
                      {"simulated_us", r.simulated_us},
                      {"cycles", r.cycles}});
    }
    return {{"clock_period_ns", period_ns_}, {"rows", rows}};
  }

  bool empty() const { return rows_.empty(); }

  struct Row {
    std::string label;
    double actual_us;
    double simulated_us;
    uint64_t cycles;
  };
  const std::vector<Row>& rows() const { return rows_; }

 private:
  double period_ns_;
  std::vector<Row> rows_;
};

}  // namespace cosim::trace
