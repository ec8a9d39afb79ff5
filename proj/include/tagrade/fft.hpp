#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

// Thin wrappers over FFTW with a per-thread plan cache.
namespace tagrade::fft {

using cplx = std::complex<double>;

// Real-to-complex forward transform; returns n/2+1 bins.
std::vector<cplx> rfft(std::span<const double> x);

// Inverse of rfft (normalized), producing n real samples.
std::vector<double> irfft(std::span<const cplx> spectrum, std::size_t n);

// Analytic signal x + iH{x}, computed in the frequency domain.
std::vector<cplx> analytic_signal(std::span<const double> x);

// Full linear convolution, length x.size() + h.size() - 1.
std::vector<double> convolve(std::span<const double> x, std::span<const double> h);

// Smallest 2^a 3^b 5^c that is >= n.
std::size_t good_size(std::size_t n);

}  // namespace tagrade::fft
