#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "synlungs/volume.hpp"

namespace synlungs::test {

// Self-cleaning scratch directory for IO tests.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("synlungs_test_" + std::to_string(rd()) + "_" +
             std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path path() const { return path_; }
  std::string str(const std::string& leaf = "") const {
    return leaf.empty() ? path_.string() : (path_ / leaf).string();
  }

 private:
  std::filesystem::path path_;
};

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

// Centered uniform volume of the given kind.
inline VoxelVolume uniform_volume(const std::array<int, 3>& dims,
                                  const std::array<double, 3>& spacing,
                                  float value, VolumeKind kind) {
  VoxelVolume v(dims, spacing, centered_origin(dims, spacing), kind);
  std::fill(v.values.begin(), v.values.end(), value);
  return v;
}

// Solid disk (infinite along z within the slab) of `inside` over `outside`.
inline VoxelVolume disk_volume(int n, double spacing, double radius_mm,
                               float inside, float outside,
                               int nz = 1, double z_spacing = 1.0) {
  VoxelVolume v = uniform_volume({n, n, nz}, {spacing, spacing, z_spacing},
                                 outside, VolumeKind::AttenuationPerMm);
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const auto c = v.voxel_center(i, j, k);
        if (c[0] * c[0] + c[1] * c[1] <= radius_mm * radius_mm) {
          v.at(i, j, k) = inside;
        }
      }
    }
  }
  return v;
}

inline double sq(double x) { return x * x; }

}  // namespace synlungs::test
