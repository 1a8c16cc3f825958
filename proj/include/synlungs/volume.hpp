#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace synlungs {

// What the scalar field means at this stage of the pipeline. Mask (binary /
// instance-label masks) and Sinogram (projection container) are the
// artifact's own extensions.
enum class VolumeKind { MaterialLabel, AttenuationPerMm, HU, Mask, Sinogram };

// On-disk element type. Values are held as float in memory; saving is
// lossless for the declared element type.
enum class ElementType { UChar, Short, Float };

std::string to_string(VolumeKind k);
VolumeKind volume_kind_from_string(const std::string& s);
std::string to_string(ElementType t);

// Dense 3D scalar grid, x-fastest order. origin is the world position (mm)
// of the center of voxel (0,0,0).
struct VoxelVolume {
  std::array<int, 3> dims{0, 0, 0};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};  // mm
  std::array<double, 3> origin{0.0, 0.0, 0.0};   // mm
  VolumeKind kind = VolumeKind::HU;
  ElementType element_type = ElementType::Float;
  std::vector<float> values;

  VoxelVolume() = default;
  VoxelVolume(std::array<int, 3> d, std::array<double, 3> s,
              std::array<double, 3> o, VolumeKind k, float fill = 0.0f);

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(j) +
                static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(k));
  }

  float at(int i, int j, int k) const { return values[index(i, j, k)]; }
  float& at(int i, int j, int k) { return values[index(i, j, k)]; }

  bool in_bounds(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
  }

  std::array<double, 3> voxel_center(int i, int j, int k) const {
    return {origin[0] + i * spacing[0], origin[1] + j * spacing[1],
            origin[2] + k * spacing[2]};
  }

  // Voxel whose box contains the world point (boxes are centered on voxel
  // centers). May be out of bounds; caller checks.
  std::array<int, 3> voxel_of(const std::array<double, 3>& p_mm) const;

  // Full world extent covered by voxel boxes: [origin - spacing/2, ...).
  std::array<double, 3> extent_mm() const {
    return {dims[0] * spacing[0], dims[1] * spacing[1], dims[2] * spacing[2]};
  }

  bool same_grid(const VoxelVolume& other, double tol = 1e-9) const;

  // Throws ValidationError on any invariant breach (dims >= 1, spacing > 0,
  // size match, non-negative attenuation, integral labels).
  void validate() const;
};

// Centered grid helper: origin such that the volume center sits at world 0.
std::array<double, 3> centered_origin(const std::array<int, 3>& dims,
                                      const std::array<double, 3>& spacing);

bool bitwise_equal(const VoxelVolume& a, const VoxelVolume& b);

}  // namespace synlungs
