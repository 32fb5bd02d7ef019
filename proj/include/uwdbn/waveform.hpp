#pragma once

#include <span>
#include <string>
#include <vector>

#include "uwdbn/common.hpp"

namespace uwdbn {

struct Waveform {
  std::vector<double> samples;
  double sample_rate_hz = 0.0;

  size_t size() const { return samples.size(); }
  double duration_s() const {
    return sample_rate_hz > 0.0 ? static_cast<double>(samples.size()) / sample_rate_hz : 0.0;
  }
};

// On-disk form: raw little-endian float32 next to a JSON sidecar holding
// {sample_rate_hz, length}. "foo.f32" pairs with "foo.json".
void write_waveform(const Waveform& w, const std::string& f32_path);
Waveform read_waveform(const std::string& f32_path);

double signal_energy(const Waveform& w);  // sum of squared samples

// Energy per bit in discrete-sample units: (sum of squares) / bit count,
// with the bit count derived from duration * rb. Used to calibrate AWGN.
double measure_eb(const Waveform& payload, double rb_bits_per_s);

}  // namespace uwdbn
