// SPDX-License-Identifier: Apache-2.0
//
// Protocol monitor: validates channel discipline and read-tag accounting
// for every message an endpoint sends or receives, and keeps per-channel
// counts. A conforming endpoint never trips it; a violation is a fatal
// protocol error.

#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <string>

#include "cosim/proto/wire.hpp"

namespace cosim::proto {

class ProtocolChecker {
 public:
  void observe(ChannelId ch, const WireMessage& m) {
    if (!allowed_on(ch, m))
      throw ProtocolError(std::string(type_name(m)) + " not allowed on channel " +
                          std::to_string(static_cast<int>(ch)));
    track_tags(ch, m);
    counts_[static_cast<size_t>(ch)]++;
    total_++;
  }

  uint64_t count(ChannelId ch) const { return counts_[static_cast<size_t>(ch)]; }
  uint64_t total() const { return total_; }
  size_t outstanding_mmio_reads() const { return mmio_tags_.size(); }
  size_t outstanding_host_reads() const { return host_tags_.size(); }

  // Forget in-flight exchanges after a session teardown.
  void reset_outstanding() {
    mmio_tags_.clear();
    host_tags_.clear();
  }

 private:
  void track_tags(ChannelId ch, const WireMessage& m) {
    switch (ch) {
      case ChannelId::kH2dReq:
        if (auto* r = std::get_if<MmioReadReq>(&m)) push_tag(mmio_tags_, r->tag);
        break;
      case ChannelId::kH2dResp:
        if (auto* r = std::get_if<MmioReadResp>(&m)) pop_tag(mmio_tags_, r->tag);
        break;
      case ChannelId::kD2hReq:
        if (auto* r = std::get_if<HostMemReadReq>(&m)) push_tag(host_tags_, r->tag);
        break;
      case ChannelId::kD2hResp:
        if (auto* r = std::get_if<HostMemReadResp>(&m)) pop_tag(host_tags_, r->tag);
        break;
    }
  }

  static void push_tag(std::deque<uint32_t>& q, uint32_t tag) {
    for (uint32_t t : q)
      if (t == tag) throw ProtocolError("duplicate outstanding read tag");
    if (q.size() >= kMaxOutstanding)
      throw ProtocolError("more than 64 outstanding read requests");
    q.push_back(tag);
  }

  static void pop_tag(std::deque<uint32_t>& q, uint32_t tag) {
    if (q.empty()) throw ProtocolError("response without outstanding request");
    if (q.front() != tag)
      throw ProtocolError("response tag does not match oldest outstanding request");
    q.pop_front();
  }

  std::array<uint64_t, kChannelCount> counts_{};
  uint64_t total_ = 0;
  std::deque<uint32_t> mmio_tags_;
  std::deque<uint32_t> host_tags_;
};

}  // namespace cosim::proto
