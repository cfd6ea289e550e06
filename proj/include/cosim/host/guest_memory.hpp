// SPDX-License-Identifier: Apache-2.0
//
// Flat bounds-checked guest-physical memory, zero-initialized. Serves
// driver buffers and device DMA. Out-of-range accesses fail whole: no
// partial reads or writes.

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "cosim/proto/wire.hpp"

namespace cosim::host {

class GuestMemory {
 public:
  static constexpr uint64_t kPage = 4096;

  explicit GuestMemory(uint64_t size) : mem_(size, 0) {
    if (size == 0 || size % kPage != 0)
      throw std::invalid_argument("guest memory size must be a nonzero multiple of 4 KiB");
  }

  uint64_t size() const { return mem_.size(); }

  proto::Status read(uint64_t addr, uint32_t len, std::vector<uint8_t>* out) const {
    if (!in_range(addr, len)) return proto::Status::kAddressError;
    out->assign(mem_.begin() + static_cast<long>(addr),
                mem_.begin() + static_cast<long>(addr + len));
    return proto::Status::kOk;
  }

  proto::Status write(uint64_t addr, std::span<const uint8_t> data) {
    if (!in_range(addr, data.size())) return proto::Status::kAddressError;
    std::copy(data.begin(), data.end(), mem_.begin() + static_cast<long>(addr));
    return proto::Status::kOk;
  }

  // Direct access for scenario setup/verification (bounds-checked).
  uint8_t* at(uint64_t addr, uint64_t len) {
    if (!in_range(addr, len)) throw std::out_of_range("guest memory access");
    return mem_.data() + addr;
  }

 private:
  bool in_range(uint64_t addr, uint64_t len) const {
    return addr <= mem_.size() && mem_.size() - addr >= len;
  }

  std::vector<uint8_t> mem_;
};

}  // namespace cosim::host
