#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "synlungs/dataset.hpp"
#include "synlungs/labeler.hpp"
#include "synlungs/lesion.hpp"

namespace synlungs {

struct PipelineConfig {
  std::uint64_t seed = 1234;
  int n_twins = 2;
  int lesions_min = 1;
  int lesions_max = 3;
  GammaParams gamma;
  ClbParams clb;
  std::vector<std::string> scanners{"W12", "W20"};
  std::vector<double> filter_cutoffs{0.5, 0.6, 1.2};
  double i0 = 2.0e5;
  double spr = 0.05;
  bool noise = true;

  std::array<int, 3> phantom_dims{96, 96, 64};
  std::array<double, 3> phantom_spacing_mm{2.5, 2.5, 3.0};
  double energy_kev = 60.0;

  std::array<int, 2> out_dims{128, 128};
  double out_spacing_mm = 1.5;
  int n_views = 360;
  double slice_pitch_mm = 3.0;
  double slice_margin_mm = 9.0;

  double irregularity_min = 0.1;
  double irregularity_max = 0.6;
  double wall_clearance_mm = 2.0;
  int max_place_attempts = 2000;

  std::string label_model_path;  // empty = built-in defaults
  double threshold = 0.5;
  LabelMode label_mode = LabelMode::Bernoulli;

  std::string output_dir;
  int n_threads = 0;  // 0 = hardware default

  void validate() const;
};

// Strict JSON: unknown keys are errors, ranges are checked. Only `seed` and
// `output_dir` are required.
PipelineConfig parse_config(const std::string& path);
PipelineConfig parse_config_json(const std::string& json_text);

struct PipelineResult {
  Manifest manifest;
  std::vector<std::string> scan_ids;      // every exported scan
  int n_twins_failed = 0;
  int n_twins_ok = 0;
  int n_lesions_placed = 0;               // unique placed lesions
  int n_lesion_incidences = 0;            // lesion x scan appearances
};

// Full chain per twin: phantom -> lesions -> per-scanner acquisition ->
// per-cutoff reconstruction -> labels -> export. Twin failures are logged
// and isolated; the survivors still produce a manifest. Output is
// byte-identical for a fixed config regardless of n_threads.
PipelineResult run_pipeline(const PipelineConfig& cfg);

}  // namespace synlungs
