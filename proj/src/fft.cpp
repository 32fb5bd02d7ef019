#include "uwdbn/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <mutex>

namespace uwdbn {

namespace {

// FFTW plan creation is not thread-safe; execution on caller-owned arrays is.
// Plans are cached per (length, direction) and executed with the new-array
// interface on fftw_malloc'd buffers, which guarantees compatible alignment.
std::mutex g_plan_mutex;

fftw_plan plan_for(size_t n, int sign) {
  static std::map<std::pair<size_t, int>, fftw_plan> cache;
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  auto key = std::make_pair(n, sign);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  fftw_complex* in = fftw_alloc_complex(n);
  fftw_complex* out = fftw_alloc_complex(n);
  fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), in, out, sign, FFTW_ESTIMATE);
  fftw_free(in);
  fftw_free(out);
  cache.emplace(key, p);
  return p;
}

}  // namespace

std::vector<std::complex<double>> fft(std::span<const std::complex<double>> x, bool inverse) {
  const size_t n = x.size();
  if (n == 0) return {};
  fftw_plan p = plan_for(n, inverse ? FFTW_BACKWARD : FFTW_FORWARD);
  fftw_complex* in = fftw_alloc_complex(n);
  fftw_complex* out = fftw_alloc_complex(n);
  std::memcpy(in, x.data(), n * sizeof(fftw_complex));
  fftw_execute_dft(p, in, out);
  std::vector<std::complex<double>> y(n);
  std::memcpy(y.data(), out, n * sizeof(fftw_complex));
  fftw_free(in);
  fftw_free(out);
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& v : y) v *= inv;
  }
  return y;
}

std::vector<std::complex<double>> analytic_signal(std::span<const double> x) {
  const size_t n = x.size();
  std::vector<std::complex<double>> c(n);
  for (size_t i = 0; i < n; ++i) c[i] = x[i];
  auto spec = fft(c);
  for (size_t k = 1; k < (n + 1) / 2; ++k) spec[k] *= 2.0;
  // DC stays; for even n the Nyquist bin stays as well
  for (size_t k = n / 2 + 1; k < n; ++k) spec[k] = 0.0;
  return fft(spec, true);
}

}  // namespace uwdbn
