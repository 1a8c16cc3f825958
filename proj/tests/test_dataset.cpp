#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "helpers.hpp"
#include "synlungs/dataset.hpp"
#include "synlungs/errors.hpp"
#include "synlungs/volume_io.hpp"

using namespace synlungs;
using namespace synlungs::test;
namespace fs = std::filesystem;

namespace {

Annotation make_row(const std::string& scan, const std::string& lesion) {
  Annotation a;
  a.scan_id = scan;
  a.lesion_id = lesion;
  a.center_mm = {10.5, -20.25, 30.0};
  a.diameter_mm = 8.0;
  a.bbox_min_mm = {6.0, -25.0, 25.5};
  a.bbox_max_mm = {15.0, -16.0, 34.5};
  a.mask_path = "masks/" + scan + ".mhd";
  a.probability = 0.625;
  a.malignant = true;
  a.scanner = "W12";
  a.filter_cutoff = 1.2;
  return a;
}

}  // namespace

TEST_CASE("annotation validation enforces geometric sanity") {
  Annotation a = make_row("s0", "l0");
  a.validate();

  Annotation outside = a;
  outside.center_mm = {100.0, 0.0, 0.0};
  CHECK_THROWS_AS(outside.validate(), ValidationError);

  Annotation thin = a;
  thin.bbox_max_mm[1] = thin.bbox_min_mm[1] + 2.0;  // < diameter
  thin.center_mm[1] = thin.bbox_min_mm[1] + 1.0;
  CHECK_THROWS_AS(thin.validate(), ValidationError);

  Annotation badp = a;
  badp.probability = 1.2;
  CHECK_THROWS_AS(badp.validate(), ValidationError);

  Annotation inverted = a;
  std::swap(inverted.bbox_min_mm, inverted.bbox_max_mm);
  CHECK_THROWS_AS(inverted.validate(), ValidationError);
}

TEST_CASE("manifest round trips and stays sorted") {
  TempDir td;
  Manifest m;
  m.dataset_seed = 42;
  m.tool_version = "0.1.0";
  m.rows.push_back(make_row("twin001_W12_hann0.50", "l01"));
  m.rows.push_back(make_row("twin000_W20_hann1.20", "l00"));
  m.rows.push_back(make_row("twin000_W12_hann0.50", "l01"));
  m.rows.push_back(make_row("twin000_W12_hann0.50", "l00"));

  const std::string path = td.str("manifest.csv");
  write_manifest(m, path);

  // First line is the exact canonical header.
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == kManifestHeader);

  const Manifest back = read_manifest(path);
  REQUIRE(back.rows.size() == 4);
  CHECK(back.rows[0].scan_id == "twin000_W12_hann0.50");
  CHECK(back.rows[0].lesion_id == "l00");
  CHECK(back.rows[1].lesion_id == "l01");
  CHECK(back.rows[3].scan_id == "twin001_W12_hann0.50");
  const Annotation& r = back.rows[0];
  CHECK(r.center_mm[0] == doctest::Approx(10.5).epsilon(1e-9));
  CHECK(r.center_mm[1] == doctest::Approx(-20.25).epsilon(1e-9));
  CHECK(r.diameter_mm == doctest::Approx(8.0));
  CHECK(r.probability == doctest::Approx(0.625));
  CHECK(r.malignant);
  CHECK(r.scanner == "W12");
  CHECK(r.filter_cutoff == doctest::Approx(1.2));
  CHECK(r.mask_path == "masks/twin000_W12_hann0.50.mhd");
}

TEST_CASE("manifest rejects duplicates and malformed files") {
  TempDir td;
  Manifest m;
  m.rows.push_back(make_row("s0", "l0"));
  m.rows.push_back(make_row("s0", "l0"));
  CHECK_THROWS_AS(m.validate(), ValidationError);
  CHECK_THROWS_AS(write_manifest(m, td.str("dup.csv")), ValidationError);

  // Empty manifest round trips as a bare header.
  Manifest empty;
  write_manifest(empty, td.str("empty.csv"));
  CHECK(read_manifest(td.str("empty.csv")).rows.empty());

  std::ofstream bad(td.str("bad.csv"));
  bad << "scan_id,nope\n";
  bad.close();
  CHECK_THROWS_AS(read_manifest(td.str("bad.csv")), IoError);

  std::ofstream shortrow(td.str("short.csv"));
  shortrow << kManifestHeader << "\n" << "a,b,1,2\n";
  shortrow.close();
  CHECK_THROWS_AS(read_manifest(td.str("short.csv")), IoError);
}

TEST_CASE("resample: identity, constants, and a linear ramp") {
  VoxelVolume v = uniform_volume({20, 16, 12}, {2.0, 2.0, 3.0}, 0.0f,
                                 VolumeKind::HU);
  for (int k = 0; k < v.dims[2]; ++k) {
    for (int j = 0; j < v.dims[1]; ++j) {
      for (int i = 0; i < v.dims[0]; ++i) {
        v.at(i, j, k) = static_cast<float>(v.voxel_center(i, j, k)[0]);
      }
    }
  }

  const VoxelVolume same = resample_volume(v, {2.0, 2.0, 3.0});
  CHECK(bitwise_equal(v, same));

  const VoxelVolume fine = resample_volume(v, {1.0, 1.0, 1.5});
  CHECK(fine.dims == std::array<int, 3>{40, 32, 24});
  // Trilinear on a ramp reproduces the ramp away from the clamped border.
  for (int k = 2; k < fine.dims[2] - 2; ++k) {
    for (int j = 2; j < fine.dims[1] - 2; ++j) {
      for (int i = 2; i < fine.dims[0] - 2; ++i) {
        const double x = fine.voxel_center(i, j, k)[0];
        REQUIRE(fine.at(i, j, k) == doctest::Approx(x).epsilon(1e-5));
      }
    }
  }

  const VoxelVolume constant = resample_volume(
      uniform_volume({9, 9, 9}, {1.7, 1.7, 1.7}, 33.0f, VolumeKind::HU),
      {1.0, 1.0, 1.0});
  for (float x : constant.values) REQUIRE(x == doctest::Approx(33.0f));

  // Label volumes stay integral under resampling.
  VoxelVolume lab = uniform_volume({8, 8, 8}, {2, 2, 2}, 0.0f,
                                   VolumeKind::MaterialLabel);
  for (std::size_t i = 0; i < lab.values.size(); ++i) {
    lab.values[i] = static_cast<float>(i % 3);
  }
  const VoxelVolume lab2 = resample_volume(lab, {1.3, 1.3, 1.3});
  for (float x : lab2.values) {
    REQUIRE(x == std::floor(x));
    REQUIRE(x >= 0.0f);
    REQUIRE(x <= 2.0f);
  }
}

TEST_CASE("extract_patch clips, pads, and standardizes") {
  VoxelVolume v = uniform_volume({16, 16, 16}, {1.0, 1.0, 1.0}, 100.0f,
                                 VolumeKind::HU);
  v.at(8, 8, 8) = 900.0f;   // above the default clip
  v.at(9, 8, 8) = -1500.0f; // below

  const VoxelVolume p = extract_patch(v, v.voxel_center(8, 8, 8), {5, 5, 5});
  CHECK(p.dims == std::array<int, 3>{5, 5, 5});
  CHECK(p.at(2, 2, 2) == 500.0f);   // clipped high
  CHECK(p.at(3, 2, 2) == -1000.0f); // clipped low
  CHECK(p.at(0, 0, 0) == 100.0f);

  // A patch hanging off the edge pads with -1000.
  const VoxelVolume edge = extract_patch(v, v.voxel_center(0, 0, 0), {5, 5, 5});
  CHECK(edge.at(0, 0, 0) == -1000.0f);
  CHECK(edge.at(2, 2, 2) == 100.0f);

  const VoxelVolume z = extract_patch(v, v.voxel_center(8, 8, 8), {7, 7, 7},
                                      {-1000.0, 500.0}, true);
  double s = 0.0, s2 = 0.0;
  for (float x : z.values) {
    s += x;
    s2 += static_cast<double>(x) * x;
  }
  const double mean = s / z.values.size();
  const double var = s2 / z.values.size() - mean * mean;
  CHECK(std::abs(mean) < 1e-5);
  CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("export_scan writes the dataset layout") {
  TempDir td;
  ReconVolume recon;
  recon.hu = uniform_volume({24, 24, 4}, {1.5, 1.5, 3.0}, -700.0f,
                            VolumeKind::HU);
  recon.scanner_name = "W20";
  recon.filter_cutoff = 0.6;
  recon.i0 = 2e5;
  VoxelVolume mask = uniform_volume({24, 24, 4}, {1.5, 1.5, 3.0}, 0.0f,
                                    VolumeKind::Mask);
  mask.at(12, 12, 2) = 1.0f;
  mask.at(4, 4, 1) = 2.0f;

  Annotation a = make_row("twin000_W20_hann0.60", "l00");
  a.mask_path.clear();
  a.scanner = "W20";
  a.filter_cutoff = 0.6;
  // Keep the box inside this small grid.
  a.center_mm = {0.0, 0.0, recon.hu.voxel_center(0, 0, 2)[2]};
  a.diameter_mm = 4.0;
  a.bbox_min_mm = {-3.0, -3.0, a.center_mm[2] - 3.0};
  a.bbox_max_mm = {3.0, 3.0, a.center_mm[2] + 3.0};

  const auto rows =
      export_scan(recon, "twin000_W20_hann0.60", mask, {a}, td.str());
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].mask_path == "masks/twin000_W20_hann0.60.mhd");

  const VoxelVolume hu2 =
      load_volume(td.str("volumes/twin000_W20_hann0.60.mhd"));
  CHECK(bitwise_equal(recon.hu, hu2));
  VolumeMeta meta;
  const VoxelVolume mask2 =
      load_volume(td.str("masks/twin000_W20_hann0.60.mhd"), &meta);
  CHECK(bitwise_equal(mask, mask2));
  CHECK(meta["scanner"] == "W20");

  // Mismatched grids are rejected.
  VoxelVolume off = uniform_volume({24, 24, 5}, {1.5, 1.5, 3.0}, 0.0f,
                                   VolumeKind::Mask);
  CHECK_THROWS_AS(export_scan(recon, "x", off, {}, td.str()),
                  ValidationError);
}
