#pragma once

#include <array>
#include <string>
#include <vector>

#include "synlungs/scan.hpp"
#include "synlungs/volume.hpp"

namespace synlungs {

struct Annotation {
  std::string scan_id;
  std::string lesion_id;
  std::array<double, 3> center_mm{};
  double diameter_mm = 0.0;
  std::array<double, 3> bbox_min_mm{};
  std::array<double, 3> bbox_max_mm{};
  std::string mask_path;  // relative to the dataset root
  double probability = 0.0;
  bool malignant = false;
  std::string scanner;
  double filter_cutoff = 0.0;

  void validate() const;
};

struct Manifest {
  std::vector<Annotation> rows;
  std::uint64_t dataset_seed = 0;
  std::string tool_version;

  // Enforces unique (scan_id, lesion_id) pairs and row validity.
  void validate() const;
};

// Writes out_dir/volumes/<scan_id>.mhd(.raw) and out_dir/masks/<scan_id>.*,
// where the mask holds per-lesion instance ids (1-based, 0 = background).
// Returns the annotations with mask_path filled in. Grids must match.
std::vector<Annotation> export_scan(const ReconVolume& recon,
                                    const std::string& scan_id,
                                    const VoxelVolume& instance_mask,
                                    std::vector<Annotation> annotations,
                                    const std::string& out_dir);

// LUNA16-style CSV: canonical columns first (coordX/Y/Z, diameter_mm), the
// pipeline's extras after. Floats carry 6 significant digits; the round
// trip is lossless at that precision.
inline constexpr const char* kManifestHeader =
    "scan_id,lesion_id,coordX,coordY,coordZ,diameter_mm,"
    "bbox_min_x,bbox_min_y,bbox_min_z,bbox_max_x,bbox_max_y,bbox_max_z,"
    "mask_path,probability,label,scanner,filter_cutoff";

void write_manifest(const Manifest& m, const std::string& path);
Manifest read_manifest(const std::string& path);

// Trilinear resampling onto a grid with the requested spacing covering the
// same world extent (dims rounded up).
VoxelVolume resample_volume(const VoxelVolume& v,
                            const std::array<double, 3>& target_spacing);

// Axis-aligned patch of patch_dims voxels centered on center_mm; voxels
// outside the volume pad at -1000 HU. Values are clipped to `clip`; with
// standardize, the patch is shifted/scaled to zero mean, unit std.
VoxelVolume extract_patch(const VoxelVolume& v,
                          const std::array<double, 3>& center_mm,
                          const std::array<int, 3>& patch_dims,
                          std::array<double, 2> clip = {-1000.0, 500.0},
                          bool standardize = false);

}  // namespace synlungs
