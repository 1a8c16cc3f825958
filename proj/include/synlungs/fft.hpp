#pragma once

#include <complex>
#include <vector>

namespace synlungs {

// In-place radix-2 complex FFT; size must be a power of two.
// inverse=true applies the 1/N scale.
void fft(std::vector<std::complex<double>>& x, bool inverse);

std::size_t next_pow2(std::size_t n);

}  // namespace synlungs
