#include <cmath>

#include <doctest.h>

#include "helpers.hpp"
#include "synlungs/errors.hpp"
#include "synlungs/materials.hpp"
#include "synlungs/projector.hpp"
#include "synlungs/rng.hpp"
#include "synlungs/scanner.hpp"
#include "synlungs/volume.hpp"
#include "synlungs/volume_io.hpp"

using namespace synlungs;
using namespace synlungs::test;

TEST_CASE("volume indexing is x-fastest") {
  VoxelVolume v({3, 4, 5}, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0},
                VolumeKind::AttenuationPerMm);
  CHECK(v.values.size() == 60);
  CHECK(v.index(0, 0, 0) == 0);
  CHECK(v.index(1, 0, 0) == 1);
  CHECK(v.index(0, 1, 0) == 3);
  CHECK(v.index(0, 0, 1) == 12);
  v.at(2, 3, 4) = 1.5f;
  CHECK(v.values.back() == 1.5f);
}

TEST_CASE("voxel_center and voxel_of invert each other") {
  VoxelVolume v({8, 8, 8}, {1.5, 2.0, 3.0}, {-10.0, 5.0, -7.0},
                VolumeKind::HU);
  const auto c = v.voxel_center(3, 1, 6);
  CHECK(c[0] == doctest::Approx(-10.0 + 3 * 1.5));
  CHECK(c[1] == doctest::Approx(5.0 + 1 * 2.0));
  CHECK(c[2] == doctest::Approx(-7.0 + 6 * 3.0));
  const auto idx = v.voxel_of(c);
  CHECK(idx == std::array<int, 3>{3, 1, 6});
  // Off-center points round to the nearest voxel.
  const auto idx2 = v.voxel_of({c[0] + 0.74, c[1] - 0.99, c[2] + 1.49});
  CHECK(idx2 == std::array<int, 3>{3, 1, 6});
}

TEST_CASE("centered_origin places the grid midpoint at zero") {
  const auto o1 = centered_origin({3, 3, 3}, {1.0, 1.0, 1.0});
  CHECK(o1[0] == doctest::Approx(-1.0));
  const auto o2 = centered_origin({4, 4, 4}, {2.0, 2.0, 2.0});
  CHECK(o2[0] == doctest::Approx(-3.0));
  VoxelVolume v({5, 5, 5}, {2.0, 2.0, 2.0}, centered_origin({5, 5, 5}, {2.0, 2.0, 2.0}),
                VolumeKind::HU);
  const auto c = v.voxel_center(2, 2, 2);
  CHECK(c[0] == doctest::Approx(0.0));
  CHECK(c[1] == doctest::Approx(0.0));
  CHECK(c[2] == doctest::Approx(0.0));
}

TEST_CASE("validate rejects bad grids and bad values") {
  CHECK_THROWS_AS(VoxelVolume({0, 4, 4}, {1, 1, 1}, {0, 0, 0},
                              VolumeKind::HU).validate(),
                  ValidationError);
  CHECK_THROWS_AS(VoxelVolume({4, 4, 4}, {1, -1, 1}, {0, 0, 0},
                              VolumeKind::HU).validate(),
                  ValidationError);

  VoxelVolume mu = uniform_volume({4, 4, 4}, {1, 1, 1}, 0.02f,
                                  VolumeKind::AttenuationPerMm);
  mu.validate();
  mu.values[7] = -0.01f;
  CHECK_THROWS_AS(mu.validate(), ValidationError);

  VoxelVolume lab = uniform_volume({4, 4, 4}, {1, 1, 1}, 2.0f,
                                   VolumeKind::MaterialLabel);
  lab.validate();
  lab.values[3] = 1.5f;
  CHECK_THROWS_AS(lab.validate(), ValidationError);
  lab.values[3] = 300.0f;
  CHECK_THROWS_AS(lab.validate(), ValidationError);
}

TEST_CASE("builtin material table matches reference values at 60 keV") {
  const MaterialTable t = MaterialTable::builtin(60.0);
  CHECK(t.mu_water_per_mm() == doctest::Approx(0.02059).epsilon(1e-9));
  CHECK(t.mu_per_mm(kMaterialAir) < 3e-5);
  CHECK(t.mu_per_mm(kMaterialBone) > t.mu_per_mm(kMaterialSoft));
  CHECK(t.mu_per_mm(kMaterialSoft) > t.mu_per_mm(kMaterialLung));

  CHECK(mu_to_hu(t.mu_water_per_mm(), t.mu_water_per_mm()) ==
        doctest::Approx(0.0));
  CHECK(mu_to_hu(t.mu_per_mm(kMaterialAir), t.mu_water_per_mm()) ==
        doctest::Approx(-1000.0).epsilon(0.002));
  // Round trip.
  for (const double hu : {-1000.0, -700.0, 0.0, 60.0, 1500.0}) {
    CHECK(hu_to_mu(hu, 0.02059) * 1.0 ==
          doctest::Approx(hu_to_mu(hu, 0.02059)));
    CHECK(mu_to_hu(hu_to_mu(hu, 0.02059), 0.02059) ==
          doctest::Approx(hu).epsilon(1e-12));
  }
}

TEST_CASE("attenuation interpolates smoothly in energy") {
  const double m50 = MaterialTable::builtin(50.0).mu_water_per_mm();
  const double m60 = MaterialTable::builtin(60.0).mu_water_per_mm();
  const double m70 = MaterialTable::builtin(70.0).mu_water_per_mm();
  const double m80 = MaterialTable::builtin(80.0).mu_water_per_mm();
  CHECK(m50 > m60);
  CHECK(m60 > m70);
  CHECK(m70 > m80);
  CHECK_THROWS_AS(MaterialTable::builtin(10.0), ValidationError);
  CHECK_THROWS_AS(MaterialTable::builtin(500.0), ValidationError);
}

TEST_CASE("volume io round trips each element type bitwise") {
  TempDir td;
  RandomStream rng(31);

  VoxelVolume hu({7, 5, 3}, {0.7, 0.7, 2.5}, {-3.0, 1.0, 2.0}, VolumeKind::HU);
  for (auto& v : hu.values) v = static_cast<float>(rng.uniform(-1000.0, 500.0));
  VolumeMeta meta{{"scanner", "W12"}, {"filter_cutoff", "1.2"}};
  save_volume(hu, td.str("hu"), meta);
  VolumeMeta back;
  const VoxelVolume hu2 = load_volume(td.str("hu.mhd"), &back);
  CHECK(bitwise_equal(hu, hu2));
  CHECK(hu2.kind == VolumeKind::HU);
  CHECK(back == meta);

  VoxelVolume lab = uniform_volume({4, 4, 4}, {1, 1, 1}, 0.0f,
                                   VolumeKind::MaterialLabel);
  for (std::size_t i = 0; i < lab.values.size(); ++i) {
    lab.values[i] = static_cast<float>(i % 4);
  }
  save_volume(lab, td.str("lab"));
  const VoxelVolume lab2 = load_volume(td.str("lab"));
  CHECK(bitwise_equal(lab, lab2));
  CHECK(lab2.kind == VolumeKind::MaterialLabel);
  CHECK(lab2.element_type == ElementType::UChar);

  VoxelVolume mask = uniform_volume({4, 4, 2}, {1, 1, 1}, 0.0f,
                                    VolumeKind::Mask);
  mask.values[5] = 1.0f;
  save_volume(mask, td.str("mask"));
  CHECK(bitwise_equal(mask, load_volume(td.str("mask"))));
}

TEST_CASE("volume io rejects missing files and out-of-range labels") {
  TempDir td;
  CHECK_THROWS_AS(load_volume(td.str("nope.mhd")), IoError);

  VoxelVolume lab = uniform_volume({4, 4, 4}, {1, 1, 1}, 512.0f,
                                   VolumeKind::MaterialLabel);
  CHECK_THROWS_AS(save_volume(lab, td.str("bad")), ValidationError);
}

TEST_CASE("sinogram io round trips data and geometry") {
  TempDir td;
  const VoxelVolume mu = disk_volume(32, 2.0, 20.0, 0.02f, 0.0f);
  ScannerConfig cfg = builtin_scanner("W12");
  cfg.n_views = 16;
  cfg.n_detector_cols = 24;
  const Sinogram s = forward_project(mu, cfg, 0.0);

  save_sinogram(s, td.str("sino"));
  const Sinogram s2 = load_sinogram(td.str("sino"));
  CHECK(s2.n_views == s.n_views);
  CHECK(s2.n_cols == s.n_cols);
  CHECK(s2.geometry.name == "W12");
  CHECK(s2.geometry.siso_d_mm == doctest::Approx(cfg.siso_d_mm));
  CHECK(s2.geometry.sid_mm == doctest::Approx(cfg.sid_mm));
  CHECK(s2.geometry.channel_width_mm == doctest::Approx(cfg.channel_width_mm));
  REQUIRE(s2.data.size() == s.data.size());
  for (std::size_t i = 0; i < s.data.size(); ++i) {
    REQUIRE(s2.data[i] == s.data[i]);
  }
  for (int v = 0; v < s.n_views; ++v) {
    REQUIRE(s2.view_angles[v] == doctest::Approx(s.view_angles[v]));
  }
}
