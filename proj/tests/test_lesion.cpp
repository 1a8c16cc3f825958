#include <cmath>
#include <numbers>
#include <queue>
#include <vector>

#include <doctest.h>

#include "helpers.hpp"
#include "synlungs/errors.hpp"
#include "synlungs/lesion.hpp"
#include "synlungs/stats.hpp"

using namespace synlungs;
using namespace synlungs::test;

namespace {

LesionSpec make_spec(double diameter, double irregularity, Margin margin,
                     std::uint64_t seed = 77) {
  LesionSpec spec;
  spec.lesion_id = "l00";
  spec.diameter_mm = diameter;
  spec.shape_seed = mix_seed(seed, kStageLesionShape);
  spec.texture_seed = mix_seed(seed, kStageLesionTexture);
  spec.shape_irregularity = irregularity;
  spec.margin = margin;
  return spec;
}

std::size_t mask_count(const VoxelVolume& m) {
  std::size_t n = 0;
  for (float v : m.values) n += v != 0.0f;
  return n;
}

double equivalent_diameter_mm(const VoxelVolume& mask) {
  const double vol = static_cast<double>(mask_count(mask)) *
                     mask.spacing[0] * mask.spacing[1] * mask.spacing[2];
  return 2.0 * std::cbrt(vol * 3.0 / (4.0 * std::numbers::pi));
}

// Number of 6-connected foreground components.
int component_count(const VoxelVolume& m) {
  std::vector<char> seen(m.values.size(), 0);
  int components = 0;
  for (int k = 0; k < m.dims[2]; ++k) {
    for (int j = 0; j < m.dims[1]; ++j) {
      for (int i = 0; i < m.dims[0]; ++i) {
        const std::size_t start = m.index(i, j, k);
        if (m.values[start] == 0.0f || seen[start]) continue;
        ++components;
        std::queue<std::array<int, 3>> q;
        q.push({i, j, k});
        seen[start] = 1;
        while (!q.empty()) {
          const auto [x, y, z] = q.front();
          q.pop();
          const int deltas[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                    {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
          for (const auto& d : deltas) {
            const int nx = x + d[0], ny = y + d[1], nz = z + d[2];
            if (!m.in_bounds(nx, ny, nz)) continue;
            const std::size_t ni = m.index(nx, ny, nz);
            if (m.values[ni] != 0.0f && !seen[ni]) {
              seen[ni] = 1;
              q.push({nx, ny, nz});
            }
          }
        }
      }
    }
  }
  return components;
}

}  // namespace

TEST_CASE("size sampler respects truncation and replays") {
  GammaParams p;  // defaults: a=2.5, b=0.35, [4, 30]
  p.validate();
  RandomStream a(41), b(41);
  for (int i = 0; i < 5000; ++i) {
    const double x = sample_size(p, a);
    REQUIRE(x >= p.min_size_mm);
    REQUIRE(x <= p.max_size_mm);
    REQUIRE(x == sample_size(p, b));
  }
}

TEST_CASE("size sampler matches the truncated-gamma mean") {
  GammaParams p;
  RandomStream rng(43);
  const int n = 40000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += sample_size(p, rng);

  // Oracle mean by Simpson quadrature over the truncation window.
  const int steps = 4000;
  const double h = (p.max_size_mm - p.min_size_mm) / steps;
  double mass = 0.0, first = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double x = p.min_size_mm + i * h;
    const double w = (i == 0 || i == steps) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double f = gamma_pdf(p.a, p.b, x);
    mass += w * f;
    first += w * f * x;
  }
  const double oracle_mean = first / mass;
  CHECK(s / n == doctest::Approx(oracle_mean).epsilon(0.01));
}

TEST_CASE("size sampler rejects empty truncation windows") {
  GammaParams p;
  p.min_size_mm = 900.0;
  p.max_size_mm = 901.0;
  RandomStream rng(1);
  CHECK_THROWS_AS(sample_size(p, rng), ValidationError);
}

TEST_CASE("gamma params validate") {
  GammaParams p;
  p.a = 0.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = GammaParams{};
  p.min_size_mm = 10.0;
  p.max_size_mm = 5.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("shape generation is deterministic and 6-connected") {
  const LesionSpec spec = make_spec(8.0, 0.4, Margin::Spiculated);
  const VoxelVolume a = generate_shape(spec);
  const VoxelVolume b = generate_shape(spec);
  CHECK(bitwise_equal(a, b));
  CHECK(a.kind == VolumeKind::Mask);
  CHECK(component_count(a) == 1);

  // Different shape seed, different mask.
  LesionSpec other = spec;
  other.shape_seed ^= 1;
  CHECK_FALSE(bitwise_equal(a, generate_shape(other)));

  // Grid center is inside, a clear border remains on every face.
  const int ci = a.dims[0] / 2, cj = a.dims[1] / 2, ck = a.dims[2] / 2;
  CHECK(a.at(ci, cj, ck) == 1.0f);
  for (int k = 0; k < a.dims[2]; ++k) {
    for (int j = 0; j < a.dims[1]; ++j) {
      for (int i = 0; i < a.dims[0]; ++i) {
        if (a.at(i, j, k) == 0.0f) continue;
        REQUIRE(i >= 2);
        REQUIRE(j >= 2);
        REQUIRE(k >= 2);
        REQUIRE(i < a.dims[0] - 2);
        REQUIRE(j < a.dims[1] - 2);
        REQUIRE(k < a.dims[2] - 2);
      }
    }
  }
}

TEST_CASE("zero irregularity smooth nodule is a sphere of the right size") {
  const LesionSpec spec = make_spec(10.0, 0.0, Margin::Smooth);
  const VoxelVolume m = generate_shape(spec);
  CHECK(equivalent_diameter_mm(m) == doctest::Approx(10.0).epsilon(0.02));

  // Every mask voxel lies within R + 1.5 voxels of the center and every
  // voxel within R - 1.5 voxels is in the mask.
  const double r = 5.0, tol = 1.5 * kLesionVoxelMm;
  const auto c = m.voxel_center(m.dims[0] / 2, m.dims[1] / 2, m.dims[2] / 2);
  for (int k = 0; k < m.dims[2]; ++k) {
    for (int j = 0; j < m.dims[1]; ++j) {
      for (int i = 0; i < m.dims[0]; ++i) {
        const auto p = m.voxel_center(i, j, k);
        const double d =
            std::sqrt(sq(p[0] - c[0]) + sq(p[1] - c[1]) + sq(p[2] - c[2]));
        if (m.at(i, j, k) != 0.0f) {
          REQUIRE(d <= r + tol);
        } else {
          REQUIRE(d >= r - tol);
        }
      }
    }
  }
}

TEST_CASE("volume normalization holds across margins and irregularity") {
  for (const Margin margin :
       {Margin::Smooth, Margin::Lobulated, Margin::Spiculated}) {
    for (const double irr : {0.1, 0.5}) {
      const LesionSpec spec = make_spec(9.0, irr, margin);
      const VoxelVolume m = generate_shape(spec);
      // Equivalent diameter stays close to nominal even for rough shapes.
      CHECK(equivalent_diameter_mm(m) == doctest::Approx(9.0).epsilon(0.08));
    }
  }
}

TEST_CASE("spiculated shapes are rougher than smooth ones") {
  auto radial_std = [](const VoxelVolume& m) {
    // Std of surface-voxel distances to the center.
    const auto c = m.voxel_center(m.dims[0] / 2, m.dims[1] / 2, m.dims[2] / 2);
    double s = 0.0, s2 = 0.0;
    int n = 0;
    for (int k = 1; k < m.dims[2] - 1; ++k) {
      for (int j = 1; j < m.dims[1] - 1; ++j) {
        for (int i = 1; i < m.dims[0] - 1; ++i) {
          if (m.at(i, j, k) == 0.0f) continue;
          const bool surface =
              m.at(i - 1, j, k) == 0.0f || m.at(i + 1, j, k) == 0.0f ||
              m.at(i, j - 1, k) == 0.0f || m.at(i, j + 1, k) == 0.0f ||
              m.at(i, j, k - 1) == 0.0f || m.at(i, j, k + 1) == 0.0f;
          if (!surface) continue;
          const auto p = m.voxel_center(i, j, k);
          const double d =
              std::sqrt(sq(p[0] - c[0]) + sq(p[1] - c[1]) + sq(p[2] - c[2]));
          s += d;
          s2 += d * d;
          ++n;
        }
      }
    }
    const double mean = s / n;
    return std::sqrt(std::max(0.0, s2 / n - mean * mean));
  };
  const double smooth =
      radial_std(generate_shape(make_spec(10.0, 0.3, Margin::Smooth)));
  const double spic =
      radial_std(generate_shape(make_spec(10.0, 0.3, Margin::Spiculated)));
  CHECK(spic > smooth);
}

TEST_CASE("clb texture: zero rate gives pure background") {
  const LesionSpec spec = make_spec(6.0, 0.2, Margin::Smooth);
  const VoxelVolume mask = generate_shape(spec);
  ClbParams clb;
  clb.mean_clusters_per_cm3 = 0.0;
  const VoxelVolume tex = generate_clb_texture(spec, clb, mask);
  CHECK(tex.kind == VolumeKind::HU);
  for (std::size_t i = 0; i < tex.values.size(); ++i) {
    if (mask.values[i] != 0.0f) {
      REQUIRE(tex.values[i] == doctest::Approx(clb.background_hu));
    } else {
      REQUIRE(tex.values[i] == kTransparentHu);
    }
  }
}

TEST_CASE("clb texture: interior mean follows the Campbell formula") {
  const LesionSpec spec = make_spec(10.0, 0.0, Margin::Smooth);
  const VoxelVolume mask = generate_shape(spec);
  ClbParams clb;  // defaults
  const VoxelVolume tex = generate_clb_texture(spec, clb, mask);
  CHECK(bitwise_equal(tex, generate_clb_texture(spec, clb, mask)));

  // E[field] = lump_density * amplitude * (2 pi r^2)^{3/2} deep inside the
  // mask, where edge effects vanish.
  const double lumps_per_mm3 =
      clb.mean_clusters_per_cm3 * 1e-3 * clb.mean_lumps_per_cluster;
  const double expected =
      clb.background_hu +
      lumps_per_mm3 * clb.lump_amplitude_hu *
          std::pow(2.0 * std::numbers::pi * sq(clb.lump_radius_mm), 1.5);

  const auto c = mask.voxel_center(mask.dims[0] / 2, mask.dims[1] / 2,
                                   mask.dims[2] / 2);
  double s = 0.0;
  int n = 0;
  for (int k = 0; k < mask.dims[2]; ++k) {
    for (int j = 0; j < mask.dims[1]; ++j) {
      for (int i = 0; i < mask.dims[0]; ++i) {
        if (mask.at(i, j, k) == 0.0f) continue;
        const auto p = mask.voxel_center(i, j, k);
        const double d =
            std::sqrt(sq(p[0] - c[0]) + sq(p[1] - c[1]) + sq(p[2] - c[2]));
        if (d > 2.5) continue;  // interior ball, > 2.5 mm from the surface
        s += tex.at(i, j, k);
        ++n;
      }
    }
  }
  REQUIRE(n > 1000);
  CHECK(s / n == doctest::Approx(expected).epsilon(0.35));
}

TEST_CASE("synthesize_lesion produces a consistent bundle") {
  const LesionSpec spec = make_spec(7.0, 0.3, Margin::Lobulated);
  ClbParams clb;
  const LesionVolume lv = synthesize_lesion(spec, clb);
  lv.validate();
  CHECK(lv.diameter_measured_mm ==
        doctest::Approx(equivalent_diameter_mm(lv.mask)).epsilon(1e-9));
  for (std::size_t i = 0; i < lv.hu.values.size(); ++i) {
    if (lv.mask.values[i] == 0.0f) {
      REQUIRE(lv.hu.values[i] == kTransparentHu);
    } else {
      REQUIRE(lv.hu.values[i] > -1000.0f);
    }
  }
}
