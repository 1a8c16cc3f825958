#include "synlungs/lesion.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

#include "synlungs/errors.hpp"
#include "synlungs/stats.hpp"

namespace synlungs {

namespace {
constexpr double kPi = std::numbers::pi;
}

void GammaParams::validate() const {
  if (!(a > 0.0)) throw ValidationError("gamma shape a must be > 0");
  if (!(b > 0.0)) throw ValidationError("gamma rate b must be > 0");
  if (!(min_size_mm > 0.0) || !(min_size_mm < max_size_mm)) {
    throw ValidationError("size bounds must satisfy 0 < min < max");
  }
}

void ClbParams::validate() const {
  if (mean_clusters_per_cm3 < 0.0 || mean_lumps_per_cluster < 0.0) {
    throw ValidationError("CLB rates must be >= 0");
  }
  if (!(cluster_sigma_mm > 0.0)) throw ValidationError("cluster_sigma must be > 0");
  if (!(lump_radius_mm > 0.0)) throw ValidationError("lump_radius must be > 0");
}

std::string to_string(Margin m) {
  switch (m) {
    case Margin::Smooth: return "Smooth";
    case Margin::Lobulated: return "Lobulated";
    case Margin::Spiculated: return "Spiculated";
  }
  return "unknown";
}

Margin margin_from_string(const std::string& s) {
  if (s == "Smooth") return Margin::Smooth;
  if (s == "Lobulated") return Margin::Lobulated;
  if (s == "Spiculated") return Margin::Spiculated;
  throw ValidationError("unknown margin: " + s);
}

std::string to_string(NoduleType t) {
  switch (t) {
    case NoduleType::Solid: return "Solid";
  }
  return "unknown";
}

void LesionSpec::validate() const {
  if (lesion_id.empty()) throw ValidationError("lesion_id must be non-empty");
  if (!(diameter_mm > 0.0)) throw ValidationError("diameter must be > 0");
  if (shape_irregularity < 0.0 || shape_irregularity > 1.0) {
    throw ValidationError("shape_irregularity must be in [0,1]");
  }
}

void LesionVolume::validate() const {
  hu.validate();
  mask.validate();
  if (!hu.same_grid(mask)) throw ValidationError("lesion hu/mask grid mismatch");
  for (int a = 0; a < 3; ++a) {
    if (std::abs(hu.spacing[a] - kLesionVoxelMm) > 1e-12) {
      throw ValidationError("lesion grid must be 0.1 mm isotropic");
    }
  }
  if (!(diameter_measured_mm > 0.0)) {
    throw ValidationError("diameter_measured must be > 0");
  }
}

double sample_size(const GammaParams& p, RandomStream& rng) {
  p.validate();
  const double mass = gamma_cdf(p.a, p.b, p.max_size_mm) -
                      gamma_cdf(p.a, p.b, p.min_size_mm);
  if (mass < 1e-6) {
    throw ValidationError("size truncation interval has negligible gamma mass");
  }
  for (;;) {
    const double x = rng.gamma(p.a, p.b);
    if (x >= p.min_size_mm && x <= p.max_size_mm) return x;
  }
}

namespace {

// Low-order direction-dependent basis (solid-harmonic polynomials restricted
// to the unit sphere), grouped by degree with decaying weights so the field
// is dominated by smooth large-scale modes.
constexpr int kNumShapeBasis = 12;

void shape_basis(double x, double y, double z, double* out) {
  out[0] = x;
  out[1] = y;
  out[2] = z;
  out[3] = x * y;
  out[4] = y * z;
  out[5] = z * x;
  out[6] = x * x - y * y;
  out[7] = 3.0 * z * z - 1.0;
  out[8] = x * y * z;
  out[9] = x * (x * x - 3.0 * y * y);
  out[10] = y * (3.0 * x * x - y * y);
  out[11] = z * (x * x - y * y);
}

constexpr double kBasisDecay[kNumShapeBasis] = {1.0, 1.0, 1.0, 0.8, 0.8, 0.8,
                                                0.8, 0.8, 0.5, 0.5, 0.5, 0.5};

struct MarginBump {
  std::array<double, 3> dir;
  double amplitude;   // mm
  double sigma_rad;
};

struct RadiusField {
  double base_radius;  // mm
  double field_scale = 0.0;
  std::array<double, kNumShapeBasis> coeff{};
  std::vector<MarginBump> bumps;
  double volume_scale = 1.0;

  double radius(double x, double y, double z) const {  // unit direction in
    double basis[kNumShapeBasis];
    shape_basis(x, y, z, basis);
    double f = 0.0;
    for (int i = 0; i < kNumShapeBasis; ++i) f += coeff[i] * basis[i];
    double r = base_radius * (1.0 + field_scale * f);
    for (const MarginBump& b : bumps) {
      const double c = std::clamp(
          x * b.dir[0] + y * b.dir[1] + z * b.dir[2], -1.0, 1.0);
      const double theta = std::acos(c);
      r += b.amplitude * std::exp(-theta * theta / (2.0 * b.sigma_rad * b.sigma_rad));
    }
    return volume_scale * std::max(r, 0.3 * base_radius);
  }
};

// Evenly spread unit directions (Fibonacci spiral) for normalizing the field.
std::vector<std::array<double, 3>> fibonacci_directions(int n) {
  std::vector<std::array<double, 3>> dirs(n);
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    dirs[i] = {rho * std::cos(phi), rho * std::sin(phi), z};
  }
  return dirs;
}

std::array<double, 3> random_direction(RandomStream& rng) {
  for (;;) {
    const double x = rng.normal(), y = rng.normal(), z = rng.normal();
    const double n = std::sqrt(x * x + y * y + z * z);
    if (n > 1e-12) return {x / n, y / n, z / n};
  }
}

RadiusField build_radius_field(const LesionSpec& spec) {
  RandomStream rng(mix_seed(spec.shape_seed, kStageLesionShape));
  RadiusField f;
  f.base_radius = 0.5 * spec.diameter_mm;

  for (int i = 0; i < kNumShapeBasis; ++i) {
    f.coeff[i] = kBasisDecay[i] * rng.normal();
  }
  const auto dirs = fibonacci_directions(2048);
  if (spec.shape_irregularity > 0.0) {
    double ss = 0.0;
    for (const auto& d : dirs) {
      double basis[kNumShapeBasis];
      shape_basis(d[0], d[1], d[2], basis);
      double v = 0.0;
      for (int i = 0; i < kNumShapeBasis; ++i) v += f.coeff[i] * basis[i];
      ss += v * v;
    }
    const double rms = std::sqrt(ss / dirs.size());
    // Target relative radial RMS 0.22 at irregularity 1.
    f.field_scale = rms > 1e-12 ? 0.22 * spec.shape_irregularity / rms : 0.0;
  }

  if (spec.margin == Margin::Spiculated) {
    const int n_spikes = static_cast<int>(rng.uniform_int(8, 14));
    for (int s = 0; s < n_spikes; ++s) {
      MarginBump b;
      b.dir = random_direction(rng);
      b.amplitude = rng.uniform(0.25, 0.45) * f.base_radius;
      b.sigma_rad = rng.uniform(0.10, 0.18);
      f.bumps.push_back(b);
    }
  } else if (spec.margin == Margin::Lobulated) {
    const int n_bumps = static_cast<int>(rng.uniform_int(4, 8));
    for (int s = 0; s < n_bumps; ++s) {
      MarginBump b;
      b.dir = random_direction(rng);
      b.amplitude = rng.uniform(0.08, 0.16) * f.base_radius;
      b.sigma_rad = 0.5;
      f.bumps.push_back(b);
    }
  }

  // Rescale so the enclosed volume matches the requested diameter.
  double sum_r3 = 0.0;
  for (const auto& d : dirs) {
    const double r = f.radius(d[0], d[1], d[2]);
    sum_r3 += r * r * r;
  }
  const double mean_r3 = sum_r3 / dirs.size();
  const double target_r3 = std::pow(f.base_radius, 3.0);
  f.volume_scale = std::cbrt(target_r3 / mean_r3);
  return f;
}

// Largest 6-connected component containing the grid center; everything else
// is dropped (thin spicules can voxelize into detached fragments).
void keep_center_component(VoxelVolume& mask) {
  const auto& d = mask.dims;
  const std::array<int, 3> c{d[0] / 2, d[1] / 2, d[2] / 2};
  if (mask.at(c[0], c[1], c[2]) == 0.0f) {
    throw ValidationError("lesion mask does not contain the grid center");
  }
  std::vector<std::uint8_t> keep(mask.voxel_count(), 0);
  std::deque<std::array<int, 3>> queue{c};
  keep[mask.index(c[0], c[1], c[2])] = 1;
  constexpr int kSteps[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
  while (!queue.empty()) {
    const auto v = queue.front();
    queue.pop_front();
    for (const auto& s : kSteps) {
      const int i = v[0] + s[0], j = v[1] + s[1], k = v[2] + s[2];
      if (!mask.in_bounds(i, j, k)) continue;
      const std::size_t n = mask.index(i, j, k);
      if (keep[n] || mask.values[n] == 0.0f) continue;
      keep[n] = 1;
      queue.push_back({i, j, k});
    }
  }
  for (std::size_t n = 0; n < mask.values.size(); ++n) {
    if (!keep[n]) mask.values[n] = 0.0f;
  }
}

}  // namespace

VoxelVolume generate_shape(const LesionSpec& spec) {
  spec.validate();
  const RadiusField field = build_radius_field(spec);

  // Grid bound: sampled max radius plus headroom for spike peaks that fall
  // between sample directions, plus the guaranteed 2-voxel clear border.
  const auto dirs = fibonacci_directions(2048);
  double r_max = 0.0;
  for (const auto& d : dirs) {
    r_max = std::max(r_max, field.radius(d[0], d[1], d[2]));
  }
  const double bound = 1.15 * r_max + 4.0 * kLesionVoxelMm;
  const int half = static_cast<int>(std::ceil(bound / kLesionVoxelMm));
  const int n = 2 * half + 1;

  const std::array<int, 3> dims{n, n, n};
  const std::array<double, 3> sp{kLesionVoxelMm, kLesionVoxelMm, kLesionVoxelMm};
  VoxelVolume mask(dims, sp, centered_origin(dims, sp), VolumeKind::Mask);

  for (int k = 0; k < n; ++k) {
    const double z = (k - half) * kLesionVoxelMm;
    for (int j = 0; j < n; ++j) {
      const double y = (j - half) * kLesionVoxelMm;
      for (int i = 0; i < n; ++i) {
        const double x = (i - half) * kLesionVoxelMm;
        const double rr = std::sqrt(x * x + y * y + z * z);
        if (rr < 1e-12) {
          mask.at(i, j, k) = 1.0f;
          continue;
        }
        const double r = field.radius(x / rr, y / rr, z / rr);
        if (rr <= r) mask.at(i, j, k) = 1.0f;
      }
    }
  }
  keep_center_component(mask);
  return mask;
}

VoxelVolume generate_clb_texture(const LesionSpec& spec, const ClbParams& p,
                                 const VoxelVolume& mask) {
  spec.validate();
  p.validate();
  if (mask.kind != VolumeKind::Mask) {
    throw ValidationError("generate_clb_texture expects a mask volume");
  }

  std::vector<std::size_t> interior;
  for (std::size_t n = 0; n < mask.values.size(); ++n) {
    if (mask.values[n] != 0.0f) interior.push_back(n);
  }
  VoxelVolume hu(mask.dims, mask.spacing, mask.origin, VolumeKind::HU,
                 kTransparentHu);
  if (interior.empty()) return hu;

  const double voxel_mm3 = mask.spacing[0] * mask.spacing[1] * mask.spacing[2];
  const double volume_cm3 = interior.size() * voxel_mm3 / 1000.0;

  RandomStream rng(mix_seed(spec.texture_seed, kStageLesionTexture));
  std::vector<float> field(mask.voxel_count(), 0.0f);

  const double r = p.lump_radius_mm;
  const double inv_2r2 = 1.0 / (2.0 * r * r);
  const double cutoff = 4.0 * r;
  const int n_clusters =
      static_cast<int>(rng.poisson(p.mean_clusters_per_cm3 * volume_cm3));

  const auto& d = mask.dims;
  for (int c = 0; c < n_clusters; ++c) {
    const std::size_t pick =
        interior[rng.uniform_int(0, static_cast<std::int64_t>(interior.size()) - 1)];
    const int ci = static_cast<int>(pick % d[0]);
    const int cj = static_cast<int>((pick / d[0]) % d[1]);
    const int ck = static_cast<int>(pick / (static_cast<std::size_t>(d[0]) * d[1]));
    const auto cc = mask.voxel_center(ci, cj, ck);
    // Continuous cluster position: uniform within the chosen voxel box.
    std::array<double, 3> cpos;
    for (int a = 0; a < 3; ++a) {
      cpos[a] = cc[a] + (rng.uniform() - 0.5) * mask.spacing[a];
    }

    const auto n_lumps = rng.poisson(p.mean_lumps_per_cluster);
    for (std::uint64_t l = 0; l < n_lumps; ++l) {
      std::array<double, 3> lp;
      for (int a = 0; a < 3; ++a) {
        lp[a] = cpos[a] + p.cluster_sigma_mm * rng.normal();
      }
      // Accumulate the Gaussian lump over a cutoff neighborhood.
      std::array<int, 3> lo, hi;
      for (int a = 0; a < 3; ++a) {
        lo[a] = std::max(0, static_cast<int>(std::floor(
                                (lp[a] - cutoff - mask.origin[a]) / mask.spacing[a])));
        hi[a] = std::min(d[a] - 1,
                         static_cast<int>(std::ceil(
                             (lp[a] + cutoff - mask.origin[a]) / mask.spacing[a])));
      }
      for (int k = lo[2]; k <= hi[2]; ++k) {
        const double dz = mask.origin[2] + k * mask.spacing[2] - lp[2];
        for (int j = lo[1]; j <= hi[1]; ++j) {
          const double dy = mask.origin[1] + j * mask.spacing[1] - lp[1];
          const double dyz2 = dy * dy + dz * dz;
          if (dyz2 > cutoff * cutoff) continue;
          const std::size_t row = mask.index(0, j, k);
          for (int i = lo[0]; i <= hi[0]; ++i) {
            const double dx = mask.origin[0] + i * mask.spacing[0] - lp[0];
            const double d2 = dx * dx + dyz2;
            if (d2 > cutoff * cutoff) continue;
            field[row + i] +=
                static_cast<float>(p.lump_amplitude_hu * std::exp(-d2 * inv_2r2));
          }
        }
      }
    }
  }

  for (const std::size_t n : interior) {
    hu.values[n] = static_cast<float>(p.background_hu) + field[n];
  }
  return hu;
}

LesionVolume synthesize_lesion(const LesionSpec& spec, const ClbParams& clb) {
  LesionVolume out;
  out.mask = generate_shape(spec);
  out.hu = generate_clb_texture(spec, clb, out.mask);
  std::size_t count = 0;
  for (float v : out.mask.values) count += v != 0.0f;
  const double voxel_mm3 =
      out.mask.spacing[0] * out.mask.spacing[1] * out.mask.spacing[2];
  const double volume = count * voxel_mm3;
  out.diameter_measured_mm = 2.0 * std::cbrt(volume * 3.0 / (4.0 * kPi));
  out.validate();
  return out;
}

bool placement_acceptable(const VoxelVolume& lung_mask,
                          const std::array<int, 3>& center_voxel,
                          double radius_mm) {
  const auto& d = lung_mask.dims;
  const auto& sp = lung_mask.spacing;
  const std::array<int, 3> reach{
      static_cast<int>(std::floor(radius_mm / sp[0])),
      static_cast<int>(std::floor(radius_mm / sp[1])),
      static_cast<int>(std::floor(radius_mm / sp[2]))};
  const double r2 = radius_mm * radius_mm;
  for (int dk = -reach[2]; dk <= reach[2]; ++dk) {
    const double z = dk * sp[2];
    for (int dj = -reach[1]; dj <= reach[1]; ++dj) {
      const double y = dj * sp[1];
      for (int di = -reach[0]; di <= reach[0]; ++di) {
        const double x = di * sp[0];
        if (x * x + y * y + z * z > r2) continue;
        const int i = center_voxel[0] + di;
        const int j = center_voxel[1] + dj;
        const int k = center_voxel[2] + dk;
        if (i < 0 || j < 0 || k < 0 || i >= d[0] || j >= d[1] || k >= d[2]) {
          return false;
        }
        if (lung_mask.at(i, j, k) == 0.0f) return false;
      }
    }
  }
  return true;
}

PlacementResult place_lesion(const VoxelVolume& lung_mask,
                             const LesionVolume& lesion,
                             const std::vector<PlacementResult>& existing,
                             RandomStream& rng, double wall_clearance_mm,
                             int max_attempts) {
  if (lung_mask.kind != VolumeKind::Mask) {
    throw ValidationError("place_lesion expects a mask volume");
  }
  std::vector<std::size_t> interior;
  for (std::size_t n = 0; n < lung_mask.values.size(); ++n) {
    if (lung_mask.values[n] != 0.0f) interior.push_back(n);
  }
  if (interior.empty()) throw ValidationError("lung mask is empty");

  const double lesion_radius = 0.5 * lesion.diameter_measured_mm;
  const double clearance_radius = lesion_radius + wall_clearance_mm;
  const auto& d = lung_mask.dims;

  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    const std::size_t pick =
        interior[rng.uniform_int(0, static_cast<std::int64_t>(interior.size()) - 1)];
    const std::array<int, 3> cv{
        static_cast<int>(pick % d[0]),
        static_cast<int>((pick / d[0]) % d[1]),
        static_cast<int>(pick / (static_cast<std::size_t>(d[0]) * d[1]))};
    if (!placement_acceptable(lung_mask, cv, clearance_radius)) continue;

    const auto cm = lung_mask.voxel_center(cv[0], cv[1], cv[2]);
    bool clear = true;
    for (const PlacementResult& e : existing) {
      const double dx = cm[0] - e.center_mm[0];
      const double dy = cm[1] - e.center_mm[1];
      const double dz = cm[2] - e.center_mm[2];
      const double min_dist = clearance_radius + e.radius_mm;
      if (dx * dx + dy * dy + dz * dz < min_dist * min_dist) {
        clear = false;
        break;
      }
    }
    if (!clear) continue;

    PlacementResult r;
    r.center_voxel = cv;
    r.center_mm = cm;
    r.attempts_used = attempt;
    r.radius_mm = lesion_radius;
    return r;
  }
  throw NoValidPlacement("no valid lesion placement after " +
                         std::to_string(max_attempts) + " attempts");
}

BinnedLesion bin_lesion_to_grid(const LesionVolume& lesion,
                                const std::array<double, 3>& center_mm,
                                const VoxelVolume& grid) {
  const VoxelVolume& lmask = lesion.mask;
  const VoxelVolume& lhu = lesion.hu;
  const auto& ld = lmask.dims;

  // Sub-voxel volume relative to a target voxel.
  const double sub_mm3 =
      lmask.spacing[0] * lmask.spacing[1] * lmask.spacing[2];
  const double vox_mm3 = grid.spacing[0] * grid.spacing[1] * grid.spacing[2];
  const double frac = sub_mm3 / vox_mm3;

  std::vector<float> occupancy(grid.voxel_count(), 0.0f);
  std::vector<float> hu_sum(grid.voxel_count(), 0.0f);

  for (int k = 0; k < ld[2]; ++k) {
    for (int j = 0; j < ld[1]; ++j) {
      const std::size_t row = lmask.index(0, j, k);
      for (int i = 0; i < ld[0]; ++i) {
        if (lmask.values[row + i] == 0.0f) continue;
        const auto lc = lmask.voxel_center(i, j, k);
        const std::array<double, 3> wp{center_mm[0] + lc[0],
                                       center_mm[1] + lc[1],
                                       center_mm[2] + lc[2]};
        const auto gv = grid.voxel_of(wp);
        if (!grid.in_bounds(gv[0], gv[1], gv[2])) continue;
        const std::size_t gi = grid.index(gv[0], gv[1], gv[2]);
        occupancy[gi] += static_cast<float>(frac);
        hu_sum[gi] += lhu.values[row + i];
      }
    }
  }

  BinnedLesion out;
  for (std::size_t n = 0; n < occupancy.size(); ++n) {
    if (occupancy[n] <= 0.0f) continue;
    const float occ = std::min(occupancy[n], 1.0f);
    const float count = occupancy[n] / static_cast<float>(frac);
    out.index.push_back(n);
    out.occupancy.push_back(occ);
    out.mean_hu.push_back(hu_sum[n] / count);
  }
  return out;
}

VoxelVolume lesion_mask_on_grid(const LesionVolume& lesion,
                                const std::array<double, 3>& center_mm,
                                const VoxelVolume& grid) {
  const BinnedLesion binned = bin_lesion_to_grid(lesion, center_mm, grid);
  VoxelVolume mask(grid.dims, grid.spacing, grid.origin, VolumeKind::Mask);
  for (std::size_t n = 0; n < binned.index.size(); ++n) {
    if (binned.occupancy[n] > 0.5f) mask.values[binned.index[n]] = 1.0f;
  }
  return mask;
}

std::pair<VoxelVolume, VoxelVolume> embed_lesion(const VoxelVolume& phantom,
                                                 const MaterialTable& table,
                                                 const LesionVolume& lesion,
                                                 const PlacementResult& placement) {
  if (phantom.kind != VolumeKind::HU &&
      phantom.kind != VolumeKind::AttenuationPerMm) {
    throw ValidationError("embed_lesion expects an HU or attenuation volume");
  }
  const BinnedLesion binned =
      bin_lesion_to_grid(lesion, placement.center_mm, phantom);
  if (binned.index.empty()) {
    throw ValidationError("lesion placement falls entirely outside the volume");
  }

  VoxelVolume out = phantom;
  VoxelVolume mask(phantom.dims, phantom.spacing, phantom.origin,
                   VolumeKind::Mask);
  const double mu_water = table.mu_water_per_mm();
  for (std::size_t n = 0; n < binned.index.size(); ++n) {
    const std::size_t gi = binned.index[n];
    const float occ = binned.occupancy[n];
    const double lesion_value =
        phantom.kind == VolumeKind::HU
            ? binned.mean_hu[n]
            : hu_to_mu(binned.mean_hu[n], mu_water);
    out.values[gi] = static_cast<float>(occ * lesion_value +
                                        (1.0f - occ) * out.values[gi]);
    if (occ > 0.5f) mask.values[gi] = 1.0f;
  }
  return {std::move(out), std::move(mask)};
}

}  // namespace synlungs
