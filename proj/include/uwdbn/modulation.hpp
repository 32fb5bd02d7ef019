#pragma once

#include <cstdint>
#include <vector>

#include "uwdbn/rng.hpp"
#include "uwdbn/waveform.hpp"

namespace uwdbn {

enum class Scheme { bpsk, qpsk };

struct ModSpec {
  Scheme scheme = Scheme::bpsk;
  double fc_hz = 2000.0;
  double fs_hz = 40000.0;
  double rb_bits_per_s = 1000.0;

  size_t bits_per_symbol() const { return scheme == Scheme::qpsk ? 2 : 1; }
  size_t samples_per_bit() const;  // fs/rb, must divide evenly
  size_t samples_per_symbol() const { return samples_per_bit() * bits_per_symbol(); }
  void validate() const;  // throws input_error
};

using BitSequence = std::vector<uint8_t>;

BitSequence random_bits(size_t n, Rng& rng);

// Carrier phase for one symbol value. BPSK: bit 1 -> 0, bit 0 -> pi.
// QPSK Gray-codes the bit pair (first bit = I sign, second = Q sign) onto
// the diagonals {pi/4, 3pi/4, 5pi/4, 7pi/4}.
double symbol_phase(Scheme scheme, unsigned symbol_value);

// Phase-shift keying on a continuous carrier: sample n of the output is
// cos(2*pi*fc*n/fs + phase(symbol containing n)).
Waveform modulate(const BitSequence& bits, const ModSpec& spec);

}  // namespace uwdbn
