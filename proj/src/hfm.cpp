#include "uwdbn/hfm.hpp"

#include <cmath>
#include <numbers>

namespace uwdbn {

Waveform make_hfm(double f0_hz, double f1_hz, double duration_s, double fs_hz,
                  SweepDir dir) {
  if (!(f0_hz > 0.0) || !(f1_hz > f0_hz))
    throw input_error("make_hfm: need 0 < f0 < f1");
  if (!(duration_s > 0.0)) throw input_error("make_hfm: duration must be positive");
  if (!(fs_hz > 2.0 * f1_hz)) throw input_error("make_hfm: fs must exceed 2*f1");

  const double k = (f1_hz - f0_hz) / (f0_hz * f1_hz * duration_s);
  const double two_pi = 2.0 * std::numbers::pi;
  const auto n = static_cast<size_t>(std::llround(duration_s * fs_hz));

  Waveform w;
  w.sample_rate_hz = fs_hz;
  w.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs_hz;
    const double phi = dir == SweepDir::up
                           ? -(two_pi / k) * std::log1p(-k * f0_hz * t)
                           : (two_pi / k) * std::log1p(k * f1_hz * t);
    w.samples[i] = std::cos(phi);
  }
  return w;
}

}  // namespace uwdbn
