#pragma once

#include "uwdbn/waveform.hpp"

namespace uwdbn {

enum class SweepDir { up, down };

// Hyperbolic frequency-modulated sweep. The up sweep's instantaneous
// frequency is f0/(1 - k*f0*t) with k = (f1-f0)/(f0*f1*T): exactly f0 at
// t = 0 and f1 at t = T. The down sweep runs f1 -> f0 and is the time
// reverse of the up sweep (same hyperbola traversed backwards).
//
// Hyperbolic sweeps keep a strong correlation peak under time scaling,
// which is why the frame pilots use them.
Waveform make_hfm(double f0_hz, double f1_hz, double duration_s, double fs_hz,
                  SweepDir dir);

}  // namespace uwdbn
