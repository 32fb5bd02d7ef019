#pragma once

#include <cstddef>

// Dense double-precision primitives behind a runtime-selected backend.
// Scalar is the reference implementation; the AVX2+FMA variant is picked on
// x86-64 when both the CPU and the OS support it (override with the
// UWDBN_KERNELS env var, values "scalar" / "avx2", or force_backend()).
//
// Reduction order is fixed inside each backend, so a given machine reproduces
// results bit-for-bit from run to run. Scalar and AVX2 differ only by the
// usual float reassociation; the equivalence tests pin the tolerance.
namespace uwdbn::kernels {

enum class Backend { scalar, avx2 };

Backend active_backend();
void force_backend(Backend b);  // throws capability_error if unsupported here
bool avx2_supported();

double dot(const double* a, const double* b, size_t n);
void axpy(double a, const double* x, double* y, size_t n);  // y += a*x
double sum(const double* x, size_t n);
double sumsq(const double* x, size_t n);

// w is row-major, rows x cols
void matvec(const double* w, size_t rows, size_t cols, const double* x,
            double* y);  // y = W x
void matvec_t(const double* w, size_t rows, size_t cols, const double* x,
              double* y);  // y = W^T x
void ger(double* w, size_t rows, size_t cols, double a, const double* x,
         const double* y);  // W += a * x * y^T

}  // namespace uwdbn::kernels
