#include "synlungs/scan.hpp"

#include <algorithm>
#include <cmath>

#include "synlungs/errors.hpp"
#include "synlungs/noise.hpp"
#include "synlungs/projector.hpp"
#include "synlungs/recon.hpp"
#include "synlungs/rng.hpp"

namespace synlungs {

ReconVolume simulate_scan(const VoxelVolume& mu, const ScannerConfig& cfg,
                          const std::vector<double>& slice_positions_mm,
                          double mu_water_per_mm, const ScanOptions& opts) {
  if (slice_positions_mm.empty()) {
    throw ValidationError("simulate_scan needs at least one slice position");
  }
  double pitch = 1.0;
  if (slice_positions_mm.size() > 1) {
    pitch = slice_positions_mm[1] - slice_positions_mm[0];
    if (!(pitch > 0.0)) throw ValidationError("slice positions must increase");
    for (std::size_t i = 1; i < slice_positions_mm.size(); ++i) {
      const double step = slice_positions_mm[i] - slice_positions_mm[i - 1];
      if (std::abs(step - pitch) > 1e-6) {
        throw ValidationError("slice positions must be uniformly spaced");
      }
    }
  }

  const int nz = static_cast<int>(slice_positions_mm.size());
  const std::array<int, 3> dims{opts.out_dims[0], opts.out_dims[1], nz};
  const std::array<double, 3> sp{opts.out_spacing_mm, opts.out_spacing_mm,
                                 pitch};
  VoxelVolume stack(
      dims, sp,
      {-0.5 * (dims[0] - 1) * sp[0], -0.5 * (dims[1] - 1) * sp[1],
       slice_positions_mm.front()},
      VolumeKind::HU);

  for (int k = 0; k < nz; ++k) {
    Sinogram sino =
        forward_project(mu, cfg, slice_positions_mm[k], opts.n_threads);
    if (opts.noise) {
      // Distinct per-slice substream; element streams hang off it.
      const std::uint64_t slice_seed =
          mix_seed(opts.seed, kStageAcquisition, static_cast<std::uint64_t>(k));
      sino = apply_quantum_noise(sino, cfg, slice_seed, opts.spr,
                                 opts.n_threads);
    }
    const VoxelVolume slice_mu = fbp_reconstruct(
        sino, cfg, opts.out_dims, opts.out_spacing_mm, opts.n_threads);
    const VoxelVolume slice_hu = mu_to_hu_volume(slice_mu, mu_water_per_mm);
    std::copy(slice_hu.values.begin(), slice_hu.values.end(),
              stack.values.begin() + stack.index(0, 0, k));
  }

  ReconVolume out;
  out.hu = std::move(stack);
  out.scanner_name = cfg.name;
  out.filter_cutoff = cfg.filter_cutoff;
  out.i0 = cfg.i0;
  out.seed = opts.seed;
  return out;
}

}  // namespace synlungs
