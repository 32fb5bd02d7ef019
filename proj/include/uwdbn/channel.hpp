#pragma once

#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "uwdbn/rng.hpp"
#include "uwdbn/waveform.hpp"

namespace uwdbn {

struct PathParams {
  double amp = 1.0;            // gain, in (0, 1]
  double doppler_alpha = 1.0;  // time-scale factor
  size_t delay_samples = 0;
  // piecewise-constant phase offsets, one per f_delta period; indexed modulo
  // length, so a single entry means a constant phase
  std::vector<double> phase_traj{0.0};
};

struct ParamDist {
  double mu = 0.0, sigma = 0.0;
};

// How random channels are drawn. Serializes to/from JSON.
struct DistributionSpec {
  double fs_hz = 40000.0;
  ParamDist amp{0.75, 0.25};                          // clamped to (0, 1]
  ParamDist phase{std::numbers::pi, std::numbers::pi / 2};  // wrapped to [0, 2pi)
  ParamDist alpha{1.0, 0.5};                          // clamped to [0.5, 1.5]
  bool alpha_random = false;  // false: every path runs at alpha.mu
  std::vector<double> path_count_probs{0.4, 0.3, 0.3};  // P(1), P(2), P(3) paths
  double tau_divisor = 100.0;      // delays uniform on [0, fs/2/divisor] samples
  double f_delta_hz = 2000.0;      // phase redraw rate
  double ebno_db = 300.0;          // >= 200 dB means noiseless
  double rb_bits_per_s = 1000.0;   // bit rate backing the Eb measurement
  double duration_hint_s = 1.0;    // how much phase trajectory to realize
};

struct ChannelParams {
  std::vector<PathParams> paths{PathParams{}};
  double ebno_db = 300.0;
  double f_delta_hz = 2000.0;
  double rb_bits_per_s = 1000.0;
};

// Draw order is fixed (path count, delays, then per-path amp/alpha/phases) so
// a seed pins the whole realization. The direct path always has delay 0;
// later paths get sorted ascending delays.
ChannelParams sample_channel_params(const DistributionSpec& spec, Rng& rng);

// s(t) = x(alpha * t); output length round(len / alpha). alpha == 1 is exact.
Waveform apply_doppler(const Waveform& x, double alpha);

// received carrier = (1 + delta_rt / delta_s) * fc
double doppler_shifted_fc(double fc_hz, double delta_rt, double delta_s);

// sum over paths of amp * Re[analytic(x delayed by tau) * e^{-j*theta(t)}],
// theta piecewise-constant with period round(fs / f_delta) output samples.
// Output length = input length + max delay.
Waveform apply_multipath(const Waveform& x, std::span<const PathParams> paths,
                         double f_delta_hz);

// i.i.d. Gaussian noise with per-sample variance eb / (2 * 10^(EbNo/10));
// eb is the discrete energy per bit (see measure_eb). EbNo >= 200 dB is an
// exact passthrough.
Waveform apply_awgn(const Waveform& x, double ebno_db, double eb_per_bit, Rng& rng);

// full pipeline: per path doppler -> delay -> phase/amp -> sum, then AWGN.
// eb_per_bit < 0 measures Eb from x via p.rb_bits_per_s (fine for pure
// payload waveforms; pass the payload's Eb explicitly for framed input).
Waveform apply_channel(const Waveform& x, const ChannelParams& p, Rng& rng,
                       double eb_per_bit = -1.0);

DistributionSpec channel_spec_from_json(const std::string& json_text);
std::string channel_spec_to_json(const DistributionSpec& spec);

}  // namespace uwdbn
