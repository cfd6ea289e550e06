// SPDX-License-Identifier: Apache-2.0
//
// Minimal independent VCD well-formedness checker used by the test suite:
// balanced scopes, declarations before $enddefinitions, changes only for
// declared ids, strictly increasing timestamps, tokens shaped per width.
// Deliberately independent of the writer implementation.

#pragma once

#include <cctype>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace cosim::test {

struct VcdCheck {
  bool ok = false;
  std::string error;
  size_t var_count = 0;
  size_t change_count = 0;
  size_t timestamp_count = 0;
};

inline VcdCheck check_vcd(const std::string& content) {
  VcdCheck res;
  std::istringstream in(content);
  std::string tok;
  std::map<std::string, uint32_t> declared;  // id code -> width
  int scope_depth = 0;
  bool defs_done = false;
  bool saw_timescale = false;
  long long last_ts = -1;

  auto fail = [&](const std::string& msg) {
    res.ok = false;
    res.error = msg;
    return res;
  };

  auto skip_until_end = [&]() {
    while (in >> tok)
      if (tok == "$end") return true;
    return false;
  };

  while (in >> tok) {
    if (tok == "$timescale") {
      if (defs_done) return fail("timescale after enddefinitions");
      saw_timescale = true;
      if (!skip_until_end()) return fail("unterminated $timescale");
    } else if (tok == "$date" || tok == "$version" || tok == "$comment") {
      if (!skip_until_end()) return fail("unterminated " + tok);
    } else if (tok == "$scope") {
      if (defs_done) return fail("scope after enddefinitions");
      std::string kind, name, end;
      if (!(in >> kind >> name >> end) || end != "$end")
        return fail("malformed $scope");
      scope_depth++;
    } else if (tok == "$upscope") {
      if (!(in >> tok) || tok != "$end") return fail("malformed $upscope");
      if (--scope_depth < 0) return fail("unbalanced $upscope");
    } else if (tok == "$var") {
      if (defs_done) return fail("var after enddefinitions");
      std::string kind, width_s, code, name, end;
      if (!(in >> kind >> width_s >> code >> name >> end))
        return fail("malformed $var");
      // Bit-selects like name[3:0] arrive as part of name; $end must follow.
      if (end != "$end") {
        if (!(in >> end) || end != "$end") return fail("malformed $var");
      }
      uint32_t width = 0;
      try {
        width = static_cast<uint32_t>(std::stoul(width_s));
      } catch (...) {
        return fail("bad var width");
      }
      if (width < 1) return fail("var width must be >= 1");
      if (declared.count(code)) return fail("duplicate id code " + code);
      declared[code] = width;
      res.var_count++;
    } else if (tok == "$enddefinitions") {
      if (!(in >> tok) || tok != "$end") return fail("malformed $enddefinitions");
      if (scope_depth != 0) return fail("unbalanced scopes at enddefinitions");
      defs_done = true;
    } else if (tok == "$dumpvars" || tok == "$dumpall" || tok == "$dumpon" ||
               tok == "$dumpoff") {
      // section markers; value-change tokens inside are validated normally
    } else if (tok == "$end") {
      // terminator of a dump section
    } else if (tok[0] == '#') {
      if (!defs_done) return fail("timestamp before enddefinitions");
      long long ts;
      try {
        ts = std::stoll(tok.substr(1));
      } catch (...) {
        return fail("bad timestamp " + tok);
      }
      if (ts <= last_ts) return fail("timestamps not strictly increasing");
      last_ts = ts;
      res.timestamp_count++;
    } else if (tok[0] == '0' || tok[0] == '1' || tok[0] == 'x' || tok[0] == 'z' ||
               tok[0] == 'X' || tok[0] == 'Z') {
      if (!defs_done) return fail("change before enddefinitions");
      std::string code = tok.substr(1);
      auto it = declared.find(code);
      if (it == declared.end()) return fail("change for undeclared id " + code);
      if (it->second != 1) return fail("scalar change for vector id " + code);
      res.change_count++;
    } else if (tok[0] == 'b' || tok[0] == 'B') {
      if (!defs_done) return fail("change before enddefinitions");
      std::string bits = tok.substr(1);
      for (char c : bits)
        if (c != '0' && c != '1' && c != 'x' && c != 'z')
          return fail("bad vector bits " + bits);
      std::string code;
      if (!(in >> code)) return fail("vector change missing id");
      auto it = declared.find(code);
      if (it == declared.end()) return fail("change for undeclared id " + code);
      if (bits.size() > it->second) return fail("vector wider than declaration");
      res.change_count++;
    } else {
      return fail("unexpected token " + tok);
    }
  }
  if (!saw_timescale) return fail("missing $timescale");
  if (!defs_done) return fail("missing $enddefinitions");
  res.ok = true;
  return res;
}

}  // namespace cosim::test
