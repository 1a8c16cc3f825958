#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <doctest.h>
#include <json.hpp>

#include "helpers.hpp"
#include "synlungs/dataset.hpp"
#include "synlungs/errors.hpp"
#include "synlungs/pipeline.hpp"
#include "synlungs/volume_io.hpp"

using namespace synlungs;
using namespace synlungs::test;
namespace fs = std::filesystem;

namespace {

// Small but complete configuration that runs in a few seconds.
std::string tiny_config(const std::string& out_dir, int n_twins = 1) {
  nlohmann::json j;
  j["seed"] = 4242;
  j["output_dir"] = out_dir;
  j["n_twins"] = n_twins;
  j["lesions_per_twin"] = {{"min", 1}, {"max", 2}};
  j["scanners"] = {"W12"};
  j["filter_cutoffs"] = {1.2};
  j["noise"] = false;
  j["phantom_dims"] = {48, 48, 36};
  j["phantom_spacing_mm"] = {5.0, 5.0, 5.0};
  j["out_dims"] = {64, 64};
  j["out_spacing_mm"] = 3.5;
  j["n_views"] = 180;
  j["slice_pitch_mm"] = 10.0;
  j["slice_margin_mm"] = 5.0;
  j["wall_clearance_mm"] = 1.0;
  j["gamma"] = {{"a", 2.5}, {"b", 0.35}, {"min_size_mm", 6.0},
                {"max_size_mm", 12.0}};
  return j.dump(2);
}

}  // namespace

TEST_CASE("config parsing: defaults, strictness, validation") {
  const PipelineConfig c =
      parse_config_json(R"({"seed": 9, "output_dir": "/tmp/x"})");
  CHECK(c.seed == 9);
  CHECK(c.output_dir == "/tmp/x");
  // Everything else falls back to the documented defaults.
  CHECK(c.n_twins == 2);
  CHECK(c.scanners == std::vector<std::string>{"W12", "W20"});
  CHECK(c.filter_cutoffs == std::vector<double>{0.5, 0.6, 1.2});
  CHECK(c.gamma.a == 2.5);
  CHECK(c.clb.background_hu == 40.0);
  CHECK(c.label_mode == LabelMode::Bernoulli);
  CHECK(c.out_dims == std::array<int, 2>{128, 128});

  // Unknown keys are config errors and name the offender.
  try {
    parse_config_json(R"({"seed": 1, "output_dir": "x", "n_twin": 3})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("n_twin") != std::string::npos);
  }

  // Same for nested objects.
  CHECK_THROWS_AS(parse_config_json(
                      R"({"seed":1,"output_dir":"x","gamma":{"shape":2}})"),
                  ConfigError);

  // Required keys and range checks.
  CHECK_THROWS_AS(parse_config_json(R"({"output_dir": "x"})"), ConfigError);
  CHECK_THROWS_AS(parse_config_json(R"({"seed": 1})"), ConfigError);
  CHECK_THROWS_AS(
      parse_config_json(R"({"seed":1,"output_dir":"x","n_twins":0})"),
      ConfigError);
  CHECK_THROWS_AS(
      parse_config_json(
          R"({"seed":1,"output_dir":"x","scanners":["W12","X9"]})"),
      ConfigError);
  CHECK_THROWS_AS(
      parse_config_json(
          R"({"seed":1,"output_dir":"x","lesions_per_twin":{"min":3,"max":1}})"),
      ConfigError);
  CHECK_THROWS_AS(
      parse_config_json(R"({"seed":1,"output_dir":"x","label_mode":"coin"})"),
      ConfigError);
  CHECK_THROWS_AS(parse_config_json("{"), ConfigError);
}

TEST_CASE("config file loading") {
  TempDir td;
  {
    std::ofstream out(td.str("cfg.json"));
    out << tiny_config(td.str("out"));
  }
  const PipelineConfig c = parse_config(td.str("cfg.json"));
  CHECK(c.seed == 4242);
  CHECK(c.n_views == 180);
  CHECK(c.gamma.min_size_mm == 6.0);
  CHECK_THROWS_AS(parse_config(td.str("missing.json")), ConfigError);
}

TEST_CASE("pipeline run produces a closed, loadable dataset") {
  TempDir td;
  const PipelineConfig cfg = parse_config_json(tiny_config(td.str("out")));
  const PipelineResult res = run_pipeline(cfg);

  CHECK(res.n_twins_failed == 0);
  CHECK(res.n_twins_ok == 1);
  REQUIRE(!res.scan_ids.empty());
  CHECK(res.scan_ids.size() == 1);  // 1 twin x 1 scanner x 1 cutoff
  CHECK(res.scan_ids[0] == "twin000_W12_hann1.20");

  // Row bookkeeping: one row per lesion per scan.
  CHECK(static_cast<int>(res.manifest.rows.size()) == res.n_lesion_incidences);
  CHECK(res.n_lesion_incidences ==
        res.n_lesions_placed * static_cast<int>(res.scan_ids.size()));
  res.manifest.validate();

  // The manifest on disk matches the in-memory result.
  const Manifest disk = read_manifest(td.str("out/manifest.csv"));
  REQUIRE(disk.rows.size() == res.manifest.rows.size());
  for (std::size_t i = 0; i < disk.rows.size(); ++i) {
    CHECK(disk.rows[i].scan_id == res.manifest.rows[i].scan_id);
    CHECK(disk.rows[i].lesion_id == res.manifest.rows[i].lesion_id);
  }

  // Every referenced volume and mask loads; labels are well-formed.
  for (const std::string& sid : res.scan_ids) {
    const VoxelVolume hu = load_volume(td.str("out/volumes/" + sid + ".mhd"));
    CHECK(hu.kind == VolumeKind::HU);
    CHECK(hu.dims[0] == 64);
  }
  std::set<std::string> mask_paths;
  for (const Annotation& r : disk.rows) {
    CHECK(r.scanner == "W12");
    CHECK(r.filter_cutoff == doctest::Approx(1.2));
    CHECK(r.probability >= 0.0);
    CHECK(r.probability <= 1.0);
    mask_paths.insert(r.mask_path);
  }
  for (const std::string& mp : mask_paths) {
    const VoxelVolume m = load_volume(td.str("out/" + mp));
    CHECK(m.kind == VolumeKind::Mask);
  }

  // dataset.json sidecar summarizes the run.
  std::ifstream in(td.str("out/dataset.json"));
  REQUIRE(in.good());
  const nlohmann::json meta = nlohmann::json::parse(in);
  CHECK(meta["seed"] == 4242);
  CHECK(meta["n_twins"] == 1);
  CHECK(meta["n_twins_failed"] == 0);
  CHECK(meta["scan_ids"].size() == 1);
}

TEST_CASE("pipeline reruns are byte-identical") {
  TempDir td;
  const PipelineConfig a = parse_config_json(tiny_config(td.str("a")));
  const PipelineConfig b = parse_config_json(tiny_config(td.str("b")));
  run_pipeline(a);
  run_pipeline(b);
  CHECK(read_bytes(td.path() / "a/manifest.csv") ==
        read_bytes(td.path() / "b/manifest.csv"));
  CHECK(read_bytes(td.path() / "a/dataset.json") ==
        read_bytes(td.path() / "b/dataset.json"));
  const std::string scan = "twin000_W12_hann1.20";
  CHECK(read_bytes(td.path() / ("a/volumes/" + scan + ".raw")) ==
        read_bytes(td.path() / ("b/volumes/" + scan + ".raw")));
  CHECK(read_bytes(td.path() / ("a/masks/" + scan + ".raw")) ==
        read_bytes(td.path() / ("b/masks/" + scan + ".raw")));
}
