// SPDX-License-Identifier: Apache-2.0
//
// Value-change-dump writer (IEEE 1364 textual subset). Signals are defined
// before the first change; hierarchical names ("top.bridge.irq") become
// nested module scopes. One VCD timestamp tick == one kernel cycle.
// Only changed values are emitted per timestamp.

#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace cosim::trace {

class VcdWriter {
 public:
  using SignalId = uint32_t;

  VcdWriter() = default;

  void begin(const std::string& path, const std::string& timescale = "1ns") {
    out_.open(path, std::ios::out | std::ios::trunc);
    timescale_ = timescale;
    open_ = out_.good();
  }

  bool ok() const { return open_ && out_.good(); }

  // kind: "wire" or "integer".
  SignalId define(const std::string& hier_name, uint32_t width,
                  const std::string& kind = "wire") {
    if (header_written_) throw std::logic_error("vcd: define after first change");
    if (width < 1 || width > 64) throw std::invalid_argument("vcd: bad width");
    for (const auto& existing : signals_)
      if (existing.name == hier_name)
        throw std::invalid_argument("vcd: duplicate signal name " + hier_name);
    Signal s;
    s.name = hier_name;
    s.width = width;
    s.kind = kind;
    s.code = code_for(static_cast<uint32_t>(signals_.size()));
    signals_.push_back(std::move(s));
    return static_cast<SignalId>(signals_.size() - 1);
  }

  void change(uint64_t cycle, SignalId id, uint64_t value) {
    if (id >= signals_.size()) throw std::logic_error("vcd: change on undefined id");
    Signal& s = signals_[id];
    if (s.width < 64 && value >> s.width)
      throw std::invalid_argument("vcd: value wider than signal");
    if (!header_written_) write_header();
    if (cycle < last_cycle_ && have_cycle_)
      throw std::logic_error("vcd: timestamps must not decrease");
    if (s.have_value && s.last_value == value) return;  // change-only
    if (!have_cycle_ || cycle != last_cycle_) {
      out_ << '#' << cycle << '\n';
      last_cycle_ = cycle;
      have_cycle_ = true;
    }
    s.have_value = true;
    s.last_value = value;
    if (s.width == 1) {
      out_ << (value ? '1' : '0') << s.code << '\n';
    } else {
      out_ << 'b';
      bool started = false;
      for (int bit = static_cast<int>(s.width) - 1; bit >= 0; --bit) {
        bool b = (value >> bit) & 1;
        if (b) started = true;
        if (started) out_ << (b ? '1' : '0');
      }
      if (!started) out_ << '0';
      out_ << ' ' << s.code << '\n';
    }
  }

  void end() {
    if (!open_) return;
    if (!header_written_) write_header();  // valid file even with no changes
    out_.flush();
    out_.close();
    open_ = false;
  }

 private:
  struct Signal {
    std::string name;
    uint32_t width = 1;
    std::string kind;
    std::string code;
    bool have_value = false;
    uint64_t last_value = 0;
  };

  // Printable identifier codes: ! .. ~ then two-character codes.
  static std::string code_for(uint32_t index) {
    std::string code;
    constexpr uint32_t kBase = 94;
    do {
      code.push_back(static_cast<char>('!' + index % kBase));
      index /= kBase;
    } while (index > 0);
    return code;
  }

  // Scope tree built from dot-separated names.
  struct Scope {
    std::map<std::string, Scope> children;
    std::vector<std::pair<const Signal*, std::string>> vars;  // signal, leaf
  };

  void write_header() {
    header_written_ = true;
    if (!open_) return;
    out_ << "$timescale " << timescale_ << " $end\n";

    Scope root;
    for (const auto& s : signals_) {
      Scope* cur = &root;
      std::string rest = s.name;
      size_t pos;
      while ((pos = rest.find('.')) != std::string::npos) {
        cur = &cur->children[rest.substr(0, pos)];
        rest = rest.substr(pos + 1);
      }
      cur->vars.emplace_back(&s, rest);
    }
    write_scope(root);
    out_ << "$enddefinitions $end\n";
  }

  void write_scope(const Scope& scope) {
    for (const auto& [v, leaf] : scope.vars) {
      out_ << "$var " << v->kind << ' ' << v->width << ' ' << v->code << ' '
           << leaf << " $end\n";
    }
    for (const auto& [name, child] : scope.children) {
      out_ << "$scope module " << name << " $end\n";
      write_scope(child);
      out_ << "$upscope $end\n";
    }
  }

  std::ofstream out_;
  std::string timescale_ = "1ns";
  bool open_ = false;
  bool header_written_ = false;
  std::vector<Signal> signals_;
  uint64_t last_cycle_ = 0;
  bool have_cycle_ = false;
};

}  // namespace cosim::trace
