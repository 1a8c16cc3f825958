#pragma once

#include <vector>

#include "synlungs/scanner.hpp"
#include "synlungs/volume.hpp"

namespace synlungs {

// Frequency-domain taps of the Hann-windowed ramp, sampled on the DFT grid
// of a zero-padded detector row. Frequencies are cycles/mm at the isocenter.
struct FilterTaps {
  int n_fft = 0;               // padded length (power of two)
  std::vector<double> gain;    // length n_fft, symmetric, gain[0] == 0
  double detector_pitch = 0.0; // mm at isocenter
  double cutoff = 0.0;         // fraction of detector Nyquist
};

// Ramp |f| * Hann window 0.5*(1+cos(pi*f/(cutoff*f_N))), zeroed beyond
// min(cutoff, 1) * f_N; cutoff > 1 widens the window past Nyquist for a
// sharper kernel. DC tap is 0.
FilterTaps hann_ramp_filter(int n_cols, double detector_pitch_at_iso,
                            double cutoff);

// Convolves one projection row (length n_cols) with the filter via the
// padded FFT. Output has length n_cols.
std::vector<double> filter_row(const std::vector<double>& row,
                               const FilterTaps& taps);

// Fan-beam filtered back-projection of a single-row sinogram onto an
// out_dims[0] x out_dims[1] grid (spacing out_spacing mm, centered on the
// isocenter). Returns attenuation per mm; combine with mu_to_hu for HU.
// Requires full 2*pi view coverage.
VoxelVolume fbp_reconstruct(const Sinogram& s, const ScannerConfig& cfg,
                            const std::array<int, 2>& out_dims,
                            double out_spacing, int n_threads = 0);

// Pointwise HU = 1000 * (mu - mu_water) / mu_water.
VoxelVolume mu_to_hu_volume(const VoxelVolume& mu, double mu_water_per_mm);

}  // namespace synlungs
