#pragma once

#include <cstdint>
#include <vector>

#include "synlungs/scanner.hpp"

namespace synlungs {

// Parametric scatter stand-in: per detector column, spr times the view-
// averaged primary counts, smoothed across columns with a triangular kernel
// of half-width n_cols/4. Returns expected scatter counts per element,
// indexed like the sinogram. spr=0 gives all zeros.
std::vector<double> estimate_scatter(const Sinogram& s, double spr);

// Photon statistics: per element, expected counts lambda = i0*exp(-p) +
// scatter; counts ~ Poisson(lambda) from a counter-based stream keyed by
// (seed, view, detector); output p' = -ln(max(counts, 1) / i0). The result
// is bit-identical for a given seed regardless of threading.
Sinogram apply_quantum_noise(const Sinogram& s, const ScannerConfig& cfg,
                             std::uint64_t seed, double spr,
                             int n_threads = 0);

}  // namespace synlungs
