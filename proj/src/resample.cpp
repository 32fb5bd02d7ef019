#include "uwdbn/resample.hpp"

#include <cmath>
#include <numbers>

#include "uwdbn/common.hpp"
#include "uwdbn/kernels.hpp"

namespace uwdbn {

namespace {

constexpr int kHalfWidth = 16;         // taps per side
constexpr int kTaps = 2 * kHalfWidth;  // covers floor(t)-15 .. floor(t)+16
constexpr int kPhases = 512;
constexpr double kBeta = 10.0;  // Kaiser shape, ~ -100 dB stopband

double sinc(double u) {
  if (u == 0.0) return 1.0;
  const double pu = std::numbers::pi * u;
  return std::sin(pu) / pu;
}

// Polyphase filter bank: row p holds the taps for fractional offset
// p/kPhases, plus one extra row so phase interpolation can read row p+1.
// Row 0 degenerates to a unit impulse, which is what makes integer
// positions exact.
struct KernelTable {
  std::vector<double> taps;

  KernelTable() : taps((kPhases + 1) * kTaps) {
    const double norm = std::cyl_bessel_i(0.0, kBeta);
    for (int p = 0; p <= kPhases; ++p) {
      const double frac = static_cast<double>(p) / kPhases;
      for (int k = 0; k < kTaps; ++k) {
        const double u = static_cast<double>(k - (kHalfWidth - 1)) - frac;
        const double x = u / kHalfWidth;
        double window = 0.0;
        if (std::abs(x) <= 1.0)
          window = std::cyl_bessel_i(0.0, kBeta * std::sqrt(1.0 - x * x)) / norm;
        taps[static_cast<size_t>(p) * kTaps + k] = sinc(u) * window;
      }
    }
  }
};

}  // namespace

std::vector<double> resample_time_scale(std::span<const double> x, double scale,
                                        size_t out_len) {
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw input_error("resample: scale must be positive and finite");

  static const KernelTable table;

  std::vector<double> out(out_len, 0.0);
  const auto n = static_cast<ptrdiff_t>(x.size());
  double edge[kTaps];

  for (size_t i = 0; i < out_len; ++i) {
    const double t = scale * static_cast<double>(i);
    const double j0f = std::floor(t);
    const auto j0 = static_cast<ptrdiff_t>(j0f);
    const double frac = t - j0f;

    if (frac == 0.0) {
      out[i] = (j0 >= 0 && j0 < n) ? x[j0] : 0.0;
      continue;
    }

    const double pf = frac * kPhases;
    const int p = static_cast<int>(pf);
    const double pw = pf - p;
    const double* row0 = table.taps.data() + static_cast<size_t>(p) * kTaps;
    const double* row1 = row0 + kTaps;

    const ptrdiff_t start = j0 - (kHalfWidth - 1);
    const double* src;
    if (start >= 0 && start + kTaps <= n) {
      src = x.data() + start;
    } else {
      for (int k = 0; k < kTaps; ++k) {
        const ptrdiff_t j = start + k;
        edge[k] = (j >= 0 && j < n) ? x[j] : 0.0;
      }
      src = edge;
    }
    const double v0 = kernels::dot(row0, src, kTaps);
    const double v1 = kernels::dot(row1, src, kTaps);
    out[i] = v0 + pw * (v1 - v0);
  }
  return out;
}

}  // namespace uwdbn
