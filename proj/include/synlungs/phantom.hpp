#pragma once

#include <cstdint>
#include <set>
#include <string>

#include "synlungs/materials.hpp"
#include "synlungs/volume.hpp"

namespace synlungs {

struct PhantomMetadata {
  std::string twin_id;
  double age_years = 0.0;
  char sex = 'F';  // 'M' or 'F'
  double bmi = 0.0;
  std::set<std::uint8_t> lung_mask_labels{kMaterialLung};

  void validate() const;
};

struct ChestPhantom {
  VoxelVolume labels;  // VolumeKind::MaterialLabel
  MaterialTable table;
  PhantomMetadata meta;
};

// Procedural chest: soft-tissue body ellipsoid, two lung ellipsoids, a bone
// spine cylinder, vessel-like soft-tissue tubes inside the lungs, air
// elsewhere. Pure function of (seed, dims, spacing); structure axes get a
// small seeded jitter so twins differ. Origin is centered on the grid.
// Requires dims >= (32,32,32).
ChestPhantom generate_chest_phantom(std::uint64_t seed,
                                    const std::array<int, 3>& dims,
                                    const std::array<double, 3>& spacing,
                                    double energy_kev = 60.0);

// Pointwise label -> mu (per mm). Grid geometry preserved.
VoxelVolume materialize_attenuation(const VoxelVolume& labels,
                                    const MaterialTable& table);

// 1 where the label is in meta.lung_mask_labels, else 0.
VoxelVolume lung_mask(const VoxelVolume& labels, const PhantomMetadata& meta);

}  // namespace synlungs
