#include "uwdbn/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <mutex>

#include "uwdbn/common.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <cpuid.h>
#define UWDBN_X86_64 1
#endif

namespace uwdbn::kernels {

namespace scalar {
double dot(const double*, const double*, size_t);
void axpy(double, const double*, double*, size_t);
double sum(const double*, size_t);
double sumsq(const double*, size_t);
}  // namespace scalar

#ifdef UWDBN_HAVE_AVX2
namespace avx2 {
double dot(const double*, const double*, size_t);
void axpy(double, const double*, double*, size_t);
double sum(const double*, size_t);
double sumsq(const double*, size_t);
}  // namespace avx2
#endif

namespace {

#ifdef UWDBN_X86_64
bool cpu_and_os_have_avx2_fma() {
  unsigned a, b, c, d;
  if (!__get_cpuid(1, &a, &b, &c, &d)) return false;
  const bool osxsave = c & (1u << 27);
  const bool avx = c & (1u << 28);
  const bool fma = c & (1u << 12);
  if (!(osxsave && avx && fma)) return false;
  // the OS must save/restore the ymm state
  unsigned eax, edx;
  __asm__ volatile("xgetbv" : "=a"(eax), "=d"(edx) : "c"(0u));
  if ((eax & 0x6u) != 0x6u) return false;
  if (!__get_cpuid_count(7, 0, &a, &b, &c, &d)) return false;
  return (b & (1u << 5)) != 0;  // AVX2
}
#endif

Backend pick_default() {
#if defined(UWDBN_HAVE_AVX2) && defined(UWDBN_X86_64)
  const char* env = std::getenv("UWDBN_KERNELS");
  if (env != nullptr && std::strcmp(env, "scalar") == 0) return Backend::scalar;
  if (cpu_and_os_have_avx2_fma()) return Backend::avx2;
#endif
  return Backend::scalar;
}

std::atomic<Backend> g_backend{Backend::scalar};
std::once_flag g_init_once;

Backend backend() {
  std::call_once(g_init_once, [] { g_backend.store(pick_default()); });
  return g_backend.load(std::memory_order_relaxed);
}

}  // namespace

bool avx2_supported() {
#if defined(UWDBN_HAVE_AVX2) && defined(UWDBN_X86_64)
  return cpu_and_os_have_avx2_fma();
#else
  return false;
#endif
}

Backend active_backend() { return backend(); }

void force_backend(Backend b) {
  if (b == Backend::avx2 && !avx2_supported())
    throw capability_error("AVX2 kernels are not supported on this machine");
  std::call_once(g_init_once, [] {});  // skip the env/default probe
  g_backend.store(b);
}

double dot(const double* a, const double* b, size_t n) {
#ifdef UWDBN_HAVE_AVX2
  if (backend() == Backend::avx2) return avx2::dot(a, b, n);
#endif
  return scalar::dot(a, b, n);
}

void axpy(double a, const double* x, double* y, size_t n) {
#ifdef UWDBN_HAVE_AVX2
  if (backend() == Backend::avx2) return avx2::axpy(a, x, y, n);
#endif
  return scalar::axpy(a, x, y, n);
}

double sum(const double* x, size_t n) {
#ifdef UWDBN_HAVE_AVX2
  if (backend() == Backend::avx2) return avx2::sum(x, n);
#endif
  return scalar::sum(x, n);
}

double sumsq(const double* x, size_t n) {
#ifdef UWDBN_HAVE_AVX2
  if (backend() == Backend::avx2) return avx2::sumsq(x, n);
#endif
  return scalar::sumsq(x, n);
}

void matvec(const double* w, size_t rows, size_t cols, const double* x, double* y) {
  for (size_t i = 0; i < rows; ++i) y[i] = dot(w + i * cols, x, cols);
}

void matvec_t(const double* w, size_t rows, size_t cols, const double* x, double* y) {
  for (size_t j = 0; j < cols; ++j) y[j] = 0.0;
  for (size_t i = 0; i < rows; ++i) axpy(x[i], w + i * cols, y, cols);
}

void ger(double* w, size_t rows, size_t cols, double a, const double* x, const double* y) {
  for (size_t i = 0; i < rows; ++i) axpy(a * x[i], y, w + i * cols, cols);
}

}  // namespace uwdbn::kernels
