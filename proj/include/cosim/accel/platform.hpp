// SPDX-License-Identifier: Apache-2.0
//
// Sorting offload platform: register file + DMA engine + streaming sorter,
// wired to whatever BusMasterPort backs the design (simulation bridge or
// in-process fake). Components attach to the kernel in the documented
// evaluation order; the platform occupies slots (2) register file,
// (3) DMA engine, (4) sorter.

#pragma once

#include <memory>

#include "cosim/accel/dma.hpp"
#include "cosim/accel/regfile.hpp"
#include "cosim/accel/sorter.hpp"
#include "cosim/dev/bus.hpp"
#include "cosim/dev/kernel.hpp"

namespace cosim::accel {

class SortPlatform {
 public:
  SortPlatform(dev::BusMasterPort& port, uint32_t n, uint32_t lanes,
               DmaEngine::Config dma_cfg = {})
      : sorter_(n, lanes),
        regfile_(n, lanes, sorter_.latency()),
        dma_(port, sorter_, regfile_, dma_cfg),
        sorter_comp_(sorter_, dma_) {
    regfile_.set_start_handler([this](uint64_t src, uint64_t dst, uint32_t len) {
      dma_.start_job(src, dst, len);
    });
    regfile_.set_irq_pulse([&port, dma_cfg] { port.pulse_irq(dma_cfg.irq_vector); });
  }

  void attach(dev::SimKernel& kernel) {
    kernel.attach(&regfile_);
    kernel.attach(&dma_);
    kernel.attach(&sorter_comp_);
  }

  RegisterFile& regfile() { return regfile_; }
  DmaEngine& dma() { return dma_; }
  StreamingSorter& sorter() { return sorter_; }
  bool sorter_out_valid() const { return sorter_comp_.probe().out_valid; }
  int32_t sorter_out_lane0() const { return sorter_comp_.probe().out_lane0; }

 private:
  class SorterComponent final : public dev::Component {
   public:
    struct Probe {
      bool out_valid = false;
      int32_t out_lane0 = 0;
    };

    SorterComponent(StreamingSorter& s, DmaEngine& dma) : s_(s), dma_(dma) {}
    const char* name() const override { return "sorter"; }
    void step(uint64_t) override {
      probe_ = Probe{};
      if (auto beat = s_.step()) {
        probe_.out_valid = true;
        probe_.out_lane0 = beat->lanes[0];
        dma_.on_sorter_output(*beat);
      }
    }
    bool quiescent() const override { return !s_.busy(); }
    const Probe& probe() const { return probe_; }

   private:
    StreamingSorter& s_;
    DmaEngine& dma_;
    Probe probe_;
  };

  StreamingSorter sorter_;
  RegisterFile regfile_;
  DmaEngine dma_;
  SorterComponent sorter_comp_;
};

}  // namespace cosim::accel
