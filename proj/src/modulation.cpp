#include "uwdbn/modulation.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

namespace uwdbn {

size_t ModSpec::samples_per_bit() const {
  const double spb = fs_hz / rb_bits_per_s;
  const double rounded = std::round(spb);
  if (!(spb > 0.0) || std::abs(spb - rounded) > 1e-9 * spb)
    throw config_error("ModSpec: fs/rb must be a positive integer");
  return static_cast<size_t>(rounded);
}

void ModSpec::validate() const {
  if (!(fc_hz > 0.0)) throw config_error("ModSpec: carrier frequency must be positive");
  // 4x the carrier, not plain Nyquist: phase features need headroom
  if (!(fs_hz >= 4.0 * fc_hz)) throw config_error("ModSpec: fs must be at least 4*fc");
  if (!(rb_bits_per_s > 0.0)) throw config_error("ModSpec: bit rate must be positive");
  (void)samples_per_bit();
}

BitSequence random_bits(size_t n, Rng& rng) {
  BitSequence bits(n);
  for (auto& b : bits) b = rng.bernoulli(0.5) ? 1 : 0;
  return bits;
}

double symbol_phase(Scheme scheme, unsigned symbol_value) {
  constexpr double pi = std::numbers::pi;
  if (scheme == Scheme::bpsk) {
    if (symbol_value > 1) throw input_error("symbol_phase: BPSK value out of range");
    return symbol_value == 1 ? 0.0 : pi;
  }
  switch (symbol_value) {  // (b0 b1), b0 = I sign, b1 = Q sign
    case 3: return pi / 4;
    case 1: return 3 * pi / 4;
    case 0: return 5 * pi / 4;
    case 2: return 7 * pi / 4;
    default: throw input_error("symbol_phase: QPSK value out of range");
  }
}

Waveform modulate(const BitSequence& bits, const ModSpec& spec) {
  spec.validate();
  if (bits.empty()) throw input_error("modulate: empty bit sequence");
  for (uint8_t b : bits)
    if (b > 1) throw input_error("modulate: bits must be 0 or 1");
  const size_t bps = spec.bits_per_symbol();
  if (bits.size() % bps != 0)
    throw input_error("modulate: QPSK needs an even number of bits");

  const size_t sps = spec.samples_per_symbol();
  const size_t nsym = bits.size() / bps;
  const double wstep = 2.0 * std::numbers::pi * spec.fc_hz / spec.fs_hz;

  Waveform w;
  w.sample_rate_hz = spec.fs_hz;
  w.samples.resize(nsym * sps);

  // when the carrier completes whole cycles per symbol, every symbol of a
  // given value is the same sample block; build each block once
  const double cycles = spec.fc_hz * static_cast<double>(sps) / spec.fs_hz;
  const bool repeats = std::abs(cycles - std::round(cycles)) < 1e-9;
  const unsigned nvalues = 1u << bps;

  std::vector<std::vector<double>> block;
  if (repeats) {
    block.resize(nvalues);
    for (unsigned m = 0; m < nvalues; ++m) {
      block[m].resize(sps);
      const double phase = symbol_phase(spec.scheme, m);
      for (size_t n = 0; n < sps; ++n) block[m][n] = std::cos(wstep * n + phase);
    }
    // negate rather than cos(x+pi): keeps antipodal symbols exactly opposite
    if (spec.scheme == Scheme::bpsk)
      for (size_t n = 0; n < sps; ++n) block[0][n] = -block[1][n];
  }

  for (size_t s = 0; s < nsym; ++s) {
    const unsigned value = bps == 1
                               ? bits[s]
                               : static_cast<unsigned>((bits[2 * s] << 1) | bits[2 * s + 1]);
    double* dst = w.samples.data() + s * sps;
    if (repeats) {
      std::memcpy(dst, block[value].data(), sps * sizeof(double));
    } else if (spec.scheme == Scheme::bpsk) {
      const double sign = value == 1 ? 1.0 : -1.0;
      for (size_t n = 0; n < sps; ++n)
        dst[n] = sign * std::cos(wstep * static_cast<double>(s * sps + n));
    } else {
      const double phase = symbol_phase(spec.scheme, value);
      for (size_t n = 0; n < sps; ++n)
        dst[n] = std::cos(wstep * static_cast<double>(s * sps + n) + phase);
    }
  }
  return w;
}

}  // namespace uwdbn
