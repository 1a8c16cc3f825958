#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "synlungs/materials.hpp"
#include "synlungs/rng.hpp"
#include "synlungs/volume.hpp"

namespace synlungs {

inline constexpr double kLesionVoxelMm = 0.1;
// HU sentinel for "no material here" voxels outside the lesion mask.
inline constexpr float kTransparentHu = -32768.0f;

// Nodule size density: b^a / Gamma(a) * l^(a-1) * exp(-b*l), truncated to
// [min_size, max_size]. b is a rate (per mm).
struct GammaParams {
  double a = 2.5;
  double b = 0.35;
  double min_size_mm = 4.0;
  double max_size_mm = 30.0;

  void validate() const;
};

// Clustered lumpy background texture: cluster centers fall uniformly in the
// mask as a Poisson process, each spawns Poisson-many Gaussian lumps.
struct ClbParams {
  double mean_clusters_per_cm3 = 150.0;
  double mean_lumps_per_cluster = 20.0;
  double cluster_sigma_mm = 0.8;
  double lump_radius_mm = 0.35;
  double lump_amplitude_hu = 25.0;
  double background_hu = 40.0;

  void validate() const;
};

enum class Margin { Smooth, Lobulated, Spiculated };
enum class NoduleType { Solid };  // extensible

std::string to_string(Margin m);
Margin margin_from_string(const std::string& s);
std::string to_string(NoduleType t);

struct LesionSpec {
  std::string lesion_id;
  double diameter_mm = 10.0;
  std::uint64_t shape_seed = 0;
  std::uint64_t texture_seed = 0;
  double shape_irregularity = 0.3;  // [0,1]
  NoduleType nodule_type = NoduleType::Solid;
  Margin margin = Margin::Smooth;

  void validate() const;
};

// Nodule at 0.1 mm isotropic resolution. hu holds kTransparentHu outside the
// mask; the mask is 6-connected and contains the grid center, with at least
// a 2-voxel clear border on every face.
struct LesionVolume {
  VoxelVolume hu;    // VolumeKind::HU
  VoxelVolume mask;  // VolumeKind::Mask, same grid
  double diameter_measured_mm = 0.0;  // equivalent-sphere diameter

  void validate() const;
};

struct PlacementResult {
  std::array<int, 3> center_voxel{0, 0, 0};
  std::array<double, 3> center_mm{0.0, 0.0, 0.0};
  int attempts_used = 0;
  double radius_mm = 0.0;  // lesion bounding-sphere radius (diameter/2)
};

// One draw from the truncated size density. Throws ValidationError when the
// truncation interval holds less than 1e-6 of the gamma mass.
double sample_size(const GammaParams& p, RandomStream& rng);

// Binary shape mask on the 0.1 mm grid; deterministic in spec.shape_seed.
VoxelVolume generate_shape(const LesionSpec& spec);

// CLB texture over the mask; deterministic in spec.texture_seed. Values
// outside the mask are kTransparentHu.
VoxelVolume generate_clb_texture(const LesionSpec& spec, const ClbParams& p,
                                 const VoxelVolume& mask);

LesionVolume synthesize_lesion(const LesionSpec& spec, const ClbParams& clb);

// True iff every voxel whose center lies within radius_mm of the center
// voxel's center is inside the mask (and in bounds). This is the acceptance
// predicate place_lesion uses; exposed for oracle testing.
bool placement_acceptable(const VoxelVolume& lung_mask,
                          const std::array<int, 3>& center_voxel,
                          double radius_mm);

// Rejection-samples a center uniformly over lung-interior voxels until the
// clearance ball fits inside the lung and clears every existing bounding
// sphere. Throws NoValidPlacement after max_attempts.
PlacementResult place_lesion(const VoxelVolume& lung_mask,
                             const LesionVolume& lesion,
                             const std::vector<PlacementResult>& existing,
                             RandomStream& rng, double wall_clearance_mm,
                             int max_attempts);

// Box-average downsample of the 0.1 mm lesion onto `grid`: per grid voxel,
// the fraction of its volume covered by lesion voxels and their mean HU.
struct BinnedLesion {
  std::vector<std::size_t> index;  // voxel indices into the target grid
  std::vector<float> occupancy;    // (0,1]
  std::vector<float> mean_hu;
};
BinnedLesion bin_lesion_to_grid(const LesionVolume& lesion,
                                const std::array<double, 3>& center_mm,
                                const VoxelVolume& grid);

// Ground-truth lesion mask on an arbitrary grid (occupancy > 0.5).
VoxelVolume lesion_mask_on_grid(const LesionVolume& lesion,
                                const std::array<double, 3>& center_mm,
                                const VoxelVolume& grid);

// Blends the lesion into the phantom (HU or attenuation volume): full-
// occupancy voxels take the lesion value converted to the phantom's kind,
// boundary voxels blend linearly by occupancy. Returns the modified volume
// and the downsampled mask. Throws if the lesion lands entirely outside.
std::pair<VoxelVolume, VoxelVolume> embed_lesion(const VoxelVolume& phantom,
                                                 const MaterialTable& table,
                                                 const LesionVolume& lesion,
                                                 const PlacementResult& placement);

}  // namespace synlungs
