#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "synlungs/scanner.hpp"
#include "synlungs/volume.hpp"

namespace synlungs {

struct ScanOptions {
  std::array<int, 2> out_dims{128, 128};
  double out_spacing_mm = 1.5;
  std::uint64_t seed = 0;
  double spr = 0.05;
  bool noise = true;  // off = noise-free primary only
  int n_threads = 0;
};

// Reconstructed HU stack with its acquisition provenance.
struct ReconVolume {
  VoxelVolume hu;  // VolumeKind::HU
  std::string scanner_name;
  double filter_cutoff = 0.0;
  double i0 = 0.0;
  std::uint64_t seed = 0;
};

// Per slice: forward project, estimate scatter, apply quantum noise,
// filter + backproject; slices stack along z at the given positions (which
// must be uniformly spaced). Deterministic in opts.seed.
ReconVolume simulate_scan(const VoxelVolume& mu, const ScannerConfig& cfg,
                          const std::vector<double>& slice_positions_mm,
                          double mu_water_per_mm, const ScanOptions& opts);

}  // namespace synlungs
