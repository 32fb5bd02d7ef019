#include "uwdbn/framing.hpp"

#include <cmath>

namespace uwdbn {

FrameLayout default_frame_layout(double fs_hz) {
  FrameLayout l;
  l.hfm_f0_hz = 1000.0;
  l.hfm_f1_hz = 4000.0;
  l.pilot_up = make_hfm(l.hfm_f0_hz, l.hfm_f1_hz, 0.020, fs_hz, SweepDir::up);
  l.pilot_down = make_hfm(l.hfm_f0_hz, l.hfm_f1_hz, 0.020, fs_hz, SweepDir::down);
  l.guard_samples = static_cast<size_t>(std::llround(0.010 * fs_hz));
  l.payload_bits = 416;
  return l;
}

Waveform build_frame(const FrameLayout& layout, const Waveform& payload) {
  if (layout.pilot_up.size() == 0 || layout.pilot_down.size() == 0)
    throw input_error("build_frame: layout has empty pilots");
  if (layout.pilot_up.sample_rate_hz != payload.sample_rate_hz ||
      layout.pilot_down.sample_rate_hz != payload.sample_rate_hz)
    throw input_error("build_frame: pilot and payload sample rates differ");

  Waveform f;
  f.sample_rate_hz = payload.sample_rate_hz;
  f.samples.reserve(layout.preamble_samples() + payload.size());
  auto append = [&f](const std::vector<double>& v) {
    f.samples.insert(f.samples.end(), v.begin(), v.end());
  };
  append(layout.pilot_up.samples);
  f.samples.insert(f.samples.end(), layout.guard_samples, 0.0);
  append(layout.pilot_down.samples);
  f.samples.insert(f.samples.end(), layout.guard_samples, 0.0);
  append(payload.samples);
  return f;
}

}  // namespace uwdbn
