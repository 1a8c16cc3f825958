#include "synlungs/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "synlungs/errors.hpp"
#include "synlungs/rng.hpp"

namespace synlungs {

void PhantomMetadata::validate() const {
  if (!(age_years > 0.0)) throw ValidationError("age must be > 0");
  if (!(bmi > 0.0)) throw ValidationError("bmi must be > 0");
  if (sex != 'M' && sex != 'F') throw ValidationError("sex must be M or F");
}

namespace {

struct Ellipsoid {
  double cx, cy, cz;  // mm
  double ax, ay, az;  // semi-axes, mm
  bool contains(double x, double y, double z) const {
    const double u = (x - cx) / ax, v = (y - cy) / ay, w = (z - cz) / az;
    return u * u + v * v + w * w <= 1.0;
  }
};

// Infinite-in-z filled tube with mild (x,y) drift per mm of z.
struct Tube {
  double x0, y0;      // axis position at z=0, mm
  double dxdz, dydz;  // drift
  double radius;      // mm
  bool contains(double x, double y, double z) const {
    const double ax = x0 + dxdz * z, ay = y0 + dydz * z;
    return (x - ax) * (x - ax) + (y - ay) * (y - ay) <= radius * radius;
  }
};

}  // namespace

ChestPhantom generate_chest_phantom(std::uint64_t seed,
                                    const std::array<int, 3>& dims,
                                    const std::array<double, 3>& spacing,
                                    double energy_kev) {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 32) {
      throw ValidationError("phantom dims must be >= 32 in every axis");
    }
  }

  RandomStream geom(mix_seed(seed, kStagePhantom));
  auto jitter = [&geom]() { return 1.0 + geom.uniform(-0.03, 0.03); };

  const double ex = 0.5 * dims[0] * spacing[0];  // half extents, mm
  const double ey = 0.5 * dims[1] * spacing[1];
  const double ez = 0.5 * dims[2] * spacing[2];

  // Body ellipse spans z fully; scaled to leave an air margin around it.
  Ellipsoid body{0.0, 0.0, 0.0, 0.90 * ex * jitter(), 0.80 * ey * jitter(),
                 1e9};
  // Lungs: mirrored ellipsoids, anterior of center, clearly separated at the
  // midline so the interior has exactly two connected components.
  const double lung_ax = 0.30 * ex * jitter();
  const double lung_ay = 0.48 * ey * jitter();
  const double lung_az = 0.80 * ez * jitter();
  const double lung_cx = 0.42 * ex;
  const double lung_cy = -0.05 * ey;
  Ellipsoid lung_l{-lung_cx, lung_cy, 0.0, lung_ax, lung_ay, lung_az};
  Ellipsoid lung_r{+lung_cx, lung_cy, 0.0, lung_ax, lung_ay, lung_az};
  // Spine: posterior bone tube on the midline.
  Tube spine{0.0, 0.55 * ey, 0.0, 0.0, 0.10 * std::min(ex, ey) * jitter()};

  // Vessel-like tubes inside each lung (soft tissue), drifting gently.
  std::vector<Tube> vessels;
  for (int side = 0; side < 2; ++side) {
    const double cx = side == 0 ? -lung_cx : lung_cx;
    const int n_vessels = static_cast<int>(geom.uniform_int(2, 4));
    for (int i = 0; i < n_vessels; ++i) {
      Tube t;
      t.x0 = cx + geom.uniform(-0.5, 0.5) * lung_ax;
      t.y0 = lung_cy + geom.uniform(-0.5, 0.5) * lung_ay;
      t.dxdz = geom.uniform(-0.08, 0.08);
      t.dydz = geom.uniform(-0.08, 0.08);
      t.radius = geom.uniform(1.0, 2.5);
      vessels.push_back(t);
    }
  }

  ChestPhantom out;
  out.table = MaterialTable::builtin(energy_kev);
  out.labels = VoxelVolume(dims, spacing, centered_origin(dims, spacing),
                           VolumeKind::MaterialLabel,
                           static_cast<float>(kMaterialAir));

  VoxelVolume& lab = out.labels;
  for (int k = 0; k < dims[2]; ++k) {
    for (int j = 0; j < dims[1]; ++j) {
      for (int i = 0; i < dims[0]; ++i) {
        const auto p = lab.voxel_center(i, j, k);
        const double x = p[0], y = p[1], z = p[2];
        std::uint8_t m = kMaterialAir;
        if (body.contains(x, y, z)) {
          m = kMaterialSoft;
          if (spine.contains(x, y, z)) {
            m = kMaterialBone;
          } else if (lung_l.contains(x, y, z) || lung_r.contains(x, y, z)) {
            m = kMaterialLung;
            for (const Tube& t : vessels) {
              if (t.contains(x, y, z)) {
                m = kMaterialSoft;
                break;
              }
            }
          }
        }
        lab.at(i, j, k) = static_cast<float>(m);
      }
    }
  }

  RandomStream demo(mix_seed(seed, kStageMetadata));
  char id[32];
  std::snprintf(id, sizeof(id), "twin%06llu",
                static_cast<unsigned long long>(seed & 0xffffffull));
  out.meta.twin_id = id;
  out.meta.age_years = std::clamp(59.0 + 15.0 * demo.normal(), 35.0, 90.0);
  out.meta.bmi = std::clamp(26.0 + 6.0 * demo.normal(), 16.0, 45.0);
  out.meta.sex = demo.uniform() < 0.546 ? 'M' : 'F';
  out.meta.lung_mask_labels = {kMaterialLung};
  return out;
}

VoxelVolume materialize_attenuation(const VoxelVolume& labels,
                                    const MaterialTable& table) {
  if (labels.kind != VolumeKind::MaterialLabel) {
    throw ValidationError("materialize_attenuation expects a label volume");
  }
  VoxelVolume mu(labels.dims, labels.spacing, labels.origin,
                 VolumeKind::AttenuationPerMm);
  // Small label space: precompute the lookup, validating every label seen.
  std::vector<float> lut(table.size());
  for (int l = 0; l < table.size(); ++l) {
    lut[l] = static_cast<float>(table.mu_per_mm(static_cast<std::uint8_t>(l)));
  }
  for (std::size_t n = 0; n < labels.values.size(); ++n) {
    const float lv = labels.values[n];
    const int l = static_cast<int>(lv);
    if (lv != static_cast<float>(l) || l < 0 || l >= table.size()) {
      throw ValidationError("label volume contains unknown label " +
                            std::to_string(lv));
    }
    mu.values[n] = lut[l];
  }
  return mu;
}

VoxelVolume lung_mask(const VoxelVolume& labels, const PhantomMetadata& meta) {
  if (labels.kind != VolumeKind::MaterialLabel) {
    throw ValidationError("lung_mask expects a label volume");
  }
  VoxelVolume mask(labels.dims, labels.spacing, labels.origin, VolumeKind::Mask);
  for (std::size_t n = 0; n < labels.values.size(); ++n) {
    const auto l = static_cast<std::uint8_t>(labels.values[n]);
    mask.values[n] = meta.lung_mask_labels.count(l) ? 1.0f : 0.0f;
  }
  return mask;
}

}  // namespace synlungs
