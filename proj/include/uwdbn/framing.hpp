#pragma once

#include "uwdbn/hfm.hpp"
#include "uwdbn/modulation.hpp"

namespace uwdbn {

// Frame on the wire: [pilot up | guard | pilot down | guard | payload].
struct FrameLayout {
  Waveform pilot_up, pilot_down;
  size_t guard_samples = 0;
  size_t payload_bits = 416;
  // pilot sweep band; zero means "pilots are not hyperbolic sweeps".
  // estimate_doppler needs the band to undo the scale-dependent correlation
  // peak shift that hyperbolic sweeps produce.
  double hfm_f0_hz = 0.0, hfm_f1_hz = 0.0;

  size_t preamble_samples() const {
    return pilot_up.size() + guard_samples + pilot_down.size() + guard_samples;
  }
  size_t pilot_spacing_samples() const { return pilot_up.size() + guard_samples; }
};

// 20 ms 1-4 kHz sweeps, 10 ms guards, 416 payload bits
FrameLayout default_frame_layout(double fs_hz);

Waveform build_frame(const FrameLayout& layout, const Waveform& payload);

}  // namespace uwdbn
