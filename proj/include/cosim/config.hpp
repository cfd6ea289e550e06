// SPDX-License-Identifier: Apache-2.0
//
// Shared device configuration: BAR geometry, MSI capability, accelerator
// parameters, and the channel endpoint. The host's pseudo device and the
// device simulator both validate against the same ranges.

#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cosim {

struct BarRegion {
  uint8_t index = 0;
  uint64_t size = 4096;
};

struct DeviceConfig {
  std::vector<BarRegion> bars{{0, 4096}};
  uint16_t msi_vectors = 32;
  uint32_t n = 1024;      // elements per batch
  uint32_t lanes = 4;     // stream width
  std::string endpoint;   // "host:port" or a filesystem path

  const BarRegion* bar(uint8_t index) const {
    for (const auto& b : bars)
      if (b.index == index) return &b;
    return nullptr;
  }

  // Returns an error description, or nullopt when valid.
  std::optional<std::string> validate() const {
    if (bars.empty() || bars.size() > 6)
      return "BAR count must be between 1 and 6";
    for (const auto& b : bars) {
      if (b.index >= 6) return "BAR index must be < 6";
      if (!std::has_single_bit(b.size) || b.size < 4096)
        return "BAR size must be a power of two >= 4 KiB";
    }
    for (size_t i = 0; i < bars.size(); ++i)
      for (size_t j = i + 1; j < bars.size(); ++j)
        if (bars[i].index == bars[j].index) return "duplicate BAR index";
    if (msi_vectors < 1 || msi_vectors > 32)
      return "MSI vector count must be between 1 and 32";
    if (!std::has_single_bit(n) || n < 4 || n > 65536)
      return "n must be a power of two in [4, 65536]";
    if (!std::has_single_bit(lanes) || lanes < 1 || lanes > n)
      return "lanes must be a power of two in [1, n]";
    return std::nullopt;
  }
};

}  // namespace cosim
