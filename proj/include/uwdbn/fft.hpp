#pragma once

#include <complex>
#include <span>
#include <vector>

namespace uwdbn {

// DFT of arbitrary length (FFTW behind a cached-plan table; safe to call from
// multiple threads). The inverse is scaled by 1/n.
std::vector<std::complex<double>> fft(std::span<const std::complex<double>> x,
                                      bool inverse = false);

// FFT -> zero the negative frequencies, double the positive ones -> IFFT.
// Real part equals the input; imaginary part is its Hilbert transform.
std::vector<std::complex<double>> analytic_signal(std::span<const double> x);

}  // namespace uwdbn
