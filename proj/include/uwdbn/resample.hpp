#pragma once

#include <span>
#include <vector>

namespace uwdbn {

// Band-limited interpolation: out[n] = x(scale * n) for n in [0, out_len),
// Kaiser-windowed sinc with a precomputed polyphase table. Integer sample
// positions are returned exactly, so scale == 1 is the identity. Samples
// outside [0, len) read as zero, which confines the error to the edges.
//
// No separate anti-alias stage: every signal in this codebase lives far below
// Nyquist/scale (carriers <= 4 kHz at fs = 40 kHz, scale <= 1.5).
std::vector<double> resample_time_scale(std::span<const double> x, double scale,
                                        size_t out_len);

}  // namespace uwdbn
