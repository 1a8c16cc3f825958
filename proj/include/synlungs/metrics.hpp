#pragma once

#include <cstdint>
#include <vector>

#include "synlungs/volume.hpp"

namespace synlungs {

struct OverlapReport {
  double dice = 0.0;
  std::int64_t intersection_voxels = 0;
  std::int64_t a_voxels = 0;
  std::int64_t b_voxels = 0;
};

// Dice = 2|A∩B| / (|A|+|B|); two empty masks agree vacuously (dice 1).
// Grids must match.
OverlapReport dice(const VoxelVolume& a, const VoxelVolume& b);

// Mann-Whitney AUC with half credit for ties. Throws DegenerateData unless
// both classes are present.
double auc(const std::vector<std::pair<double, bool>>& scored);

}  // namespace synlungs
