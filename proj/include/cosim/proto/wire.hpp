// SPDX-License-Identifier: Apache-2.0
//
// Bridge wire protocol: length-prefixed frames over reliable ordered byte
// streams.
//
// Frame:  [u32 length (LE, byte count of body)][body]
// Body:   [u8 msg type][fields, all multi-byte integers little-endian]
//
// Type codes:
//   0x00 Hello           {u16 version, u8 channel_id, u8 role}
//   0x01 MmioReadReq     {u8 bar, u64 offset, u32 len, u32 tag}
//   0x02 MmioReadResp    {u32 tag, u8 status, data...}
//   0x03 MmioWriteReq    {u8 bar, u64 offset, u32 len, data...}
//   0x11 HostMemReadReq  {u64 addr, u32 len, u32 tag}
//   0x12 HostMemReadResp {u32 tag, u8 status, data...}
//   0x13 HostMemWriteReq {u64 addr, u32 len, data...}
//   0x21 InterruptReq    {u16 vector}
//
// A payload never exceeds 4 KiB; larger bus bursts are split by the
// requester. Writes are posted (no acknowledgment message).

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "cosim/support/bytes.hpp"

namespace cosim::proto {

inline constexpr uint16_t kProtocolVersion = 1;
inline constexpr uint32_t kMaxPayload = 4096;
inline constexpr uint32_t kMaxFrameBody = kMaxPayload + 32;
inline constexpr uint32_t kMaxOutstanding = 64;

enum class Status : uint8_t {
  kOk = 0,
  kAddressError = 1,
  kDisconnectAbort = 2,
};

// Four unidirectional channels, two per direction. A response channel
// carries responses for requests issued on its paired request channel, in
// issue order.
enum class ChannelId : uint8_t {
  kH2dReq = 0,   // host -> device: MmioReadReq, MmioWriteReq
  kH2dResp = 1,  // device -> host: MmioReadResp
  kD2hReq = 2,   // device -> host: HostMemReadReq/WriteReq, InterruptReq
  kD2hResp = 3,  // host -> device: HostMemReadResp
};
inline constexpr size_t kChannelCount = 4;

enum class Role : uint8_t { kHost = 0, kDevice = 1 };

struct Hello {
  uint16_t version = kProtocolVersion;
  uint8_t channel_id = 0;
  uint8_t role = 0;
  bool operator==(const Hello&) const = default;
};

struct MmioReadReq {
  uint8_t bar = 0;
  uint64_t offset = 0;
  uint32_t len = 0;
  uint32_t tag = 0;
  bool operator==(const MmioReadReq&) const = default;
};

struct MmioReadResp {
  uint32_t tag = 0;
  uint8_t status = 0;
  std::vector<uint8_t> data;
  bool operator==(const MmioReadResp&) const = default;
};

struct MmioWriteReq {
  uint8_t bar = 0;
  uint64_t offset = 0;
  std::vector<uint8_t> data;  // wire `len` always equals data.size()
  bool operator==(const MmioWriteReq&) const = default;
};

struct HostMemReadReq {
  uint64_t addr = 0;
  uint32_t len = 0;
  uint32_t tag = 0;
  bool operator==(const HostMemReadReq&) const = default;
};

struct HostMemReadResp {
  uint32_t tag = 0;
  uint8_t status = 0;
  std::vector<uint8_t> data;
  bool operator==(const HostMemReadResp&) const = default;
};

struct HostMemWriteReq {
  uint64_t addr = 0;
  std::vector<uint8_t> data;
  bool operator==(const HostMemWriteReq&) const = default;
};

struct InterruptReq {
  uint16_t vector = 0;
  bool operator==(const InterruptReq&) const = default;
};

using WireMessage = std::variant<Hello, MmioReadReq, MmioReadResp, MmioWriteReq,
                                 HostMemReadReq, HostMemReadResp,
                                 HostMemWriteReq, InterruptReq>;

// Malformed or invariant-violating traffic. Unrecoverable for the channel
// that produced it.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace msgtype {
inline constexpr uint8_t kHello = 0x00;
inline constexpr uint8_t kMmioReadReq = 0x01;
inline constexpr uint8_t kMmioReadResp = 0x02;
inline constexpr uint8_t kMmioWriteReq = 0x03;
inline constexpr uint8_t kHostMemReadReq = 0x11;
inline constexpr uint8_t kHostMemReadResp = 0x12;
inline constexpr uint8_t kHostMemWriteReq = 0x13;
inline constexpr uint8_t kInterruptReq = 0x21;
}  // namespace msgtype

inline uint8_t type_code(const WireMessage& m) {
  struct V {
    uint8_t operator()(const Hello&) { return msgtype::kHello; }
    uint8_t operator()(const MmioReadReq&) { return msgtype::kMmioReadReq; }
    uint8_t operator()(const MmioReadResp&) { return msgtype::kMmioReadResp; }
    uint8_t operator()(const MmioWriteReq&) { return msgtype::kMmioWriteReq; }
    uint8_t operator()(const HostMemReadReq&) { return msgtype::kHostMemReadReq; }
    uint8_t operator()(const HostMemReadResp&) { return msgtype::kHostMemReadResp; }
    uint8_t operator()(const HostMemWriteReq&) { return msgtype::kHostMemWriteReq; }
    uint8_t operator()(const InterruptReq&) { return msgtype::kInterruptReq; }
  };
  return std::visit(V{}, m);
}

inline const char* type_name(const WireMessage& m) {
  switch (type_code(m)) {
    case msgtype::kHello: return "hello";
    case msgtype::kMmioReadReq: return "mmio_read_req";
    case msgtype::kMmioReadResp: return "mmio_read_resp";
    case msgtype::kMmioWriteReq: return "mmio_write_req";
    case msgtype::kHostMemReadReq: return "host_mem_read_req";
    case msgtype::kHostMemReadResp: return "host_mem_read_resp";
    case msgtype::kHostMemWriteReq: return "host_mem_write_req";
    case msgtype::kInterruptReq: return "interrupt_req";
  }
  return "?";
}

// Message-set discipline per channel (post-handshake traffic only).
inline bool allowed_on(ChannelId ch, const WireMessage& m) {
  uint8_t t = type_code(m);
  switch (ch) {
    case ChannelId::kH2dReq:
      return t == msgtype::kMmioReadReq || t == msgtype::kMmioWriteReq;
    case ChannelId::kH2dResp:
      return t == msgtype::kMmioReadResp;
    case ChannelId::kD2hReq:
      return t == msgtype::kHostMemReadReq || t == msgtype::kHostMemWriteReq ||
             t == msgtype::kInterruptReq;
    case ChannelId::kD2hResp:
      return t == msgtype::kHostMemReadResp;
  }
  return false;
}

namespace detail {

inline const char* check_read_span(uint32_t len) {
  if (len == 0) return "read/write len must be > 0";
  if (len > kMaxPayload) return "payload exceeds 4 KiB";
  return nullptr;
}

inline const char* check_resp(uint8_t status, const std::vector<uint8_t>& data) {
  if (status > static_cast<uint8_t>(Status::kDisconnectAbort))
    return "unknown status code";
  if (status != 0 && !data.empty()) return "non-OK response carries data";
  if (status == 0 && data.empty()) return "OK response carries no data";
  if (data.size() > kMaxPayload) return "payload exceeds 4 KiB";
  return nullptr;
}

inline const char* check_write_data(const std::vector<uint8_t>& data) {
  if (data.empty()) return "read/write len must be > 0";
  if (data.size() > kMaxPayload) return "payload exceeds 4 KiB";
  return nullptr;
}

}  // namespace detail

// Returns nullptr when `m` satisfies the message invariants, otherwise a
// static description of the violation.
inline const char* check(const WireMessage& m) {
  struct V {
    const char* operator()(const Hello&) { return nullptr; }
    const char* operator()(const MmioReadReq& r) {
      return detail::check_read_span(r.len);
    }
    const char* operator()(const MmioReadResp& r) {
      return detail::check_resp(r.status, r.data);
    }
    const char* operator()(const MmioWriteReq& r) {
      return detail::check_write_data(r.data);
    }
    const char* operator()(const HostMemReadReq& r) {
      return detail::check_read_span(r.len);
    }
    const char* operator()(const HostMemReadResp& r) {
      return detail::check_resp(r.status, r.data);
    }
    const char* operator()(const HostMemWriteReq& r) {
      return detail::check_write_data(r.data);
    }
    const char* operator()(const InterruptReq&) { return nullptr; }
  };
  return std::visit(V{}, m);
}

// Encodes one message as a length-prefixed frame. Throws ProtocolError when
// `m` violates the message invariants.
inline std::vector<uint8_t> encode_frame(const WireMessage& m) {
  if (const char* err = check(m)) throw ProtocolError(err);

  std::vector<uint8_t> body;
  body.push_back(type_code(m));
  struct V {
    std::vector<uint8_t>& b;
    void operator()(const Hello& x) {
      put_u16le(b, x.version);
      put_u8(b, x.channel_id);
      put_u8(b, x.role);
    }
    void operator()(const MmioReadReq& x) {
      put_u8(b, x.bar);
      put_u64le(b, x.offset);
      put_u32le(b, x.len);
      put_u32le(b, x.tag);
    }
    void operator()(const MmioReadResp& x) {
      put_u32le(b, x.tag);
      put_u8(b, x.status);
      b.insert(b.end(), x.data.begin(), x.data.end());
    }
    void operator()(const MmioWriteReq& x) {
      put_u8(b, x.bar);
      put_u64le(b, x.offset);
      put_u32le(b, static_cast<uint32_t>(x.data.size()));
      b.insert(b.end(), x.data.begin(), x.data.end());
    }
    void operator()(const HostMemReadReq& x) {
      put_u64le(b, x.addr);
      put_u32le(b, x.len);
      put_u32le(b, x.tag);
    }
    void operator()(const HostMemReadResp& x) {
      put_u32le(b, x.tag);
      put_u8(b, x.status);
      b.insert(b.end(), x.data.begin(), x.data.end());
    }
    void operator()(const HostMemWriteReq& x) {
      put_u64le(b, x.addr);
      put_u32le(b, static_cast<uint32_t>(x.data.size()));
      b.insert(b.end(), x.data.begin(), x.data.end());
    }
    void operator()(const InterruptReq& x) { put_u16le(b, x.vector); }
  };
  std::visit(V{body}, m);

  std::vector<uint8_t> frame;
  frame.reserve(4 + body.size());
  put_u32le(frame, static_cast<uint32_t>(body.size()));
  frame.insert(frame.end(), body.begin(), body.end());
  return frame;
}

namespace detail {

inline WireMessage decode_body(std::span<const uint8_t> body) {
  ByteReader r(body);
  uint8_t type = r.u8();
  WireMessage m;
  switch (type) {
    case msgtype::kHello: {
      Hello x;
      x.version = r.u16();
      x.channel_id = r.u8();
      x.role = r.u8();
      m = x;
      break;
    }
    case msgtype::kMmioReadReq: {
      MmioReadReq x;
      x.bar = r.u8();
      x.offset = r.u64();
      x.len = r.u32();
      x.tag = r.u32();
      m = x;
      break;
    }
    case msgtype::kMmioReadResp: {
      MmioReadResp x;
      x.tag = r.u32();
      x.status = r.u8();
      x.data = r.bytes(r.remaining());
      m = x;
      break;
    }
    case msgtype::kMmioWriteReq: {
      MmioWriteReq x;
      x.bar = r.u8();
      x.offset = r.u64();
      uint32_t len = r.u32();
      if (len != r.remaining()) throw ProtocolError("write len/data mismatch");
      x.data = r.bytes(len);
      m = x;
      break;
    }
    case msgtype::kHostMemReadReq: {
      HostMemReadReq x;
      x.addr = r.u64();
      x.len = r.u32();
      x.tag = r.u32();
      m = x;
      break;
    }
    case msgtype::kHostMemReadResp: {
      HostMemReadResp x;
      x.tag = r.u32();
      x.status = r.u8();
      x.data = r.bytes(r.remaining());
      m = x;
      break;
    }
    case msgtype::kHostMemWriteReq: {
      HostMemWriteReq x;
      x.addr = r.u64();
      uint32_t len = r.u32();
      if (len != r.remaining()) throw ProtocolError("write len/data mismatch");
      x.data = r.bytes(len);
      m = x;
      break;
    }
    case msgtype::kInterruptReq: {
      InterruptReq x;
      x.vector = r.u16();
      m = x;
      break;
    }
    default:
      throw ProtocolError("unknown msg_type");
  }
  if (!r.ok()) throw ProtocolError("truncated message body");
  if (r.remaining() != 0) throw ProtocolError("trailing bytes in message body");
  if (const char* err = check(m)) throw ProtocolError(err);
  return m;
}

}  // namespace detail

// Incremental frame decoder. Bytes may arrive in arbitrary chunk
// boundaries; complete frames come out exactly once, in order. Malformed
// input throws ProtocolError and the owning channel must be torn down.
class FrameDecoder {
 public:
  void feed(std::span<const uint8_t> bytes) {
    buf_.insert(buf_.end(), bytes.begin(), bytes.end());
  }

  std::optional<WireMessage> next() {
    if (buf_.size() - rd_ < 4) {
      compact();
      return std::nullopt;
    }
    uint32_t len = get_u32le(buf_.data() + rd_);
    if (len < 1 || len > kMaxFrameBody) throw ProtocolError("bad frame length");
    if (buf_.size() - rd_ < 4 + static_cast<size_t>(len)) {
      compact();
      return std::nullopt;
    }
    std::span<const uint8_t> body(buf_.data() + rd_ + 4, len);
    WireMessage m = detail::decode_body(body);
    rd_ += 4 + len;
    return m;
  }

  size_t buffered() const { return buf_.size() - rd_; }

 private:
  void compact() {
    if (rd_ > 0) {
      buf_.erase(buf_.begin(), buf_.begin() + static_cast<long>(rd_));
      rd_ = 0;
    }
  }

  std::vector<uint8_t> buf_;
  size_t rd_ = 0;
};

}  // namespace cosim::proto
