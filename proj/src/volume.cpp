#include "synlungs/volume.hpp"

#include <cmath>
#include <cstring>

#include "synlungs/errors.hpp"

namespace synlungs {

std::string to_string(VolumeKind k) {
  switch (k) {
    case VolumeKind::MaterialLabel: return "material_label";
    case VolumeKind::AttenuationPerMm: return "attenuation_per_mm";
    case VolumeKind::HU: return "hu";
    case VolumeKind::Mask: return "mask";
    case VolumeKind::Sinogram: return "sinogram";
  }
  return "unknown";
}

VolumeKind volume_kind_from_string(const std::string& s) {
  if (s == "material_label") return VolumeKind::MaterialLabel;
  if (s == "attenuation_per_mm") return VolumeKind::AttenuationPerMm;
  if (s == "hu") return VolumeKind::HU;
  if (s == "mask") return VolumeKind::Mask;
  if (s == "sinogram") return VolumeKind::Sinogram;
  throw ValidationError("unknown volume kind: " + s);
}

std::string to_string(ElementType t) {
  switch (t) {
    case ElementType::UChar: return "MET_UCHAR";
    case ElementType::Short: return "MET_SHORT";
    case ElementType::Float: return "MET_FLOAT";
  }
  return "unknown";
}

VoxelVolume::VoxelVolume(std::array<int, 3> d, std::array<double, 3> s,
                         std::array<double, 3> o, VolumeKind k, float fill)
    : dims(d), spacing(s), origin(o), kind(k) {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) throw ValidationError("volume dims must be >= 1");
    if (!(spacing[a] > 0.0)) throw ValidationError("volume spacing must be > 0");
  }
  element_type = (k == VolumeKind::MaterialLabel || k == VolumeKind::Mask)
                     ? ElementType::UChar
                     : ElementType::Float;
  values.assign(voxel_count(), fill);
}

std::array<int, 3> VoxelVolume::voxel_of(const std::array<double, 3>& p_mm) const {
  std::array<int, 3> v;
  for (int a = 0; a < 3; ++a) {
    v[a] = static_cast<int>(std::floor((p_mm[a] - origin[a]) / spacing[a] + 0.5));
  }
  return v;
}

bool VoxelVolume::same_grid(const VoxelVolume& other, double tol) const {
  if (dims != other.dims) return false;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(spacing[a] - other.spacing[a]) > tol) return false;
    if (std::abs(origin[a] - other.origin[a]) > tol) return false;
  }
  return true;
}

void VoxelVolume::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) throw ValidationError("volume dims must be >= 1");
    if (!(spacing[a] > 0.0)) throw ValidationError("volume spacing must be > 0");
  }
  if (values.size() != voxel_count()) {
    throw ValidationError("volume value buffer size does not match dims");
  }
  if (kind == VolumeKind::AttenuationPerMm) {
    for (float v : values) {
      if (!(v >= 0.0f) || !std::isfinite(v)) {
        throw ValidationError("attenuation volume must be finite and >= 0");
      }
    }
  } else if (kind == VolumeKind::MaterialLabel || kind == VolumeKind::Mask) {
    for (float v : values) {
      if (v < 0.0f || v != std::floor(v) || v > 255.0f) {
        throw ValidationError("label/mask volume must hold integers in [0,255]");
      }
    }
  } else {
    for (float v : values) {
      if (!std::isfinite(v)) throw ValidationError("volume values must be finite");
    }
  }
}

std::array<double, 3> centered_origin(const std::array<int, 3>& dims,
                                      const std::array<double, 3>& spacing) {
  // Center of voxel (0,0,0) such that the midpoint of the full extent is 0.
  return {-0.5 * (dims[0] - 1) * spacing[0], -0.5 * (dims[1] - 1) * spacing[1],
          -0.5 * (dims[2] - 1) * spacing[2]};
}

bool bitwise_equal(const VoxelVolume& a, const VoxelVolume& b) {
  if (!a.same_grid(b, 0.0) || a.kind != b.kind) return false;
  if (a.values.size() != b.values.size()) return false;
  return std::memcmp(a.values.data(), b.values.data(),
                     a.values.size() * sizeof(float)) == 0;
}

}  // namespace synlungs
