// synlungs: synthetic lung-CT dataset generator.
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "synlungs/dataset.hpp"
#include "synlungs/errors.hpp"
#include "synlungs/labeler.hpp"
#include "synlungs/lesion.hpp"
#include "synlungs/metrics.hpp"
#include "synlungs/noise.hpp"
#include "synlungs/phantom.hpp"
#include "synlungs/pipeline.hpp"
#include "synlungs/projector.hpp"
#include "synlungs/recon.hpp"
#include "synlungs/scan.hpp"
#include "synlungs/threading.hpp"
#include "synlungs/version.hpp"
#include "synlungs/volume_io.hpp"

namespace fs = std::filesystem;
using namespace synlungs;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitConfig = 2;

std::array<double, 3> parse_triple(const std::string& s, const char* what) {
  std::array<double, 3> out;
  if (std::sscanf(s.c_str(), "%lf,%lf,%lf", &out[0], &out[1], &out[2]) != 3) {
    throw ConfigError(std::string(what) + " must be three comma-separated numbers");
  }
  return out;
}

double parse_hann_filter(const std::string& s) {
  if (s.rfind("hann:", 0) != 0) {
    throw ConfigError("--filter must look like hann:<cutoff>");
  }
  try {
    const double cutoff = std::stod(s.substr(5));
    if (!(cutoff > 0.0)) throw ConfigError("filter cutoff must be > 0");
    return cutoff;
  } catch (const std::invalid_argument&) {
    throw ConfigError("--filter must look like hann:<cutoff>");
  }
}

// Loads the <stem>.mhd / <stem>_mask.mhd pair written by `lesion synth`.
LesionVolume load_lesion(const std::string& stem) {
  LesionVolume lv;
  lv.hu = load_volume(stem + ".mhd");
  lv.mask = load_volume(stem + "_mask.mhd");
  std::size_t count = 0;
  for (float v : lv.mask.values) count += v != 0.0f;
  const double voxel_mm3 =
      lv.mask.spacing[0] * lv.mask.spacing[1] * lv.mask.spacing[2];
  lv.diameter_measured_mm =
      2.0 * std::cbrt(count * voxel_mm3 * 3.0 / (4.0 * 3.14159265358979323846));
  lv.validate();
  return lv;
}

VoxelVolume attenuation_from(const std::string& path, double energy_kev) {
  const VoxelVolume v = load_volume(path);
  if (v.kind == VolumeKind::AttenuationPerMm) return v;
  if (v.kind == VolumeKind::MaterialLabel) {
    return materialize_attenuation(v, MaterialTable::builtin(energy_kev));
  }
  throw ConfigError("input volume must be material labels or attenuation: " +
                    path);
}

int cmd_phantom_gen(std::uint64_t seed, const std::string& dims_str,
                    const std::string& spacing_str, double energy_kev,
                    const std::string& out, const std::string& mu_out,
                    const std::string& mask_out) {
  const auto dd = parse_triple(dims_str, "--dims");
  const std::array<int, 3> dims{static_cast<int>(dd[0]),
                                static_cast<int>(dd[1]),
                                static_cast<int>(dd[2])};
  const auto spacing = parse_triple(spacing_str, "--spacing");
  const ChestPhantom p = generate_chest_phantom(seed, dims, spacing, energy_kev);

  VolumeMeta meta;
  meta["twin_id"] = p.meta.twin_id;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", p.meta.age_years);
  meta["age"] = buf;
  meta["sex"] = std::string(1, p.meta.sex);
  std::snprintf(buf, sizeof(buf), "%.6g", p.meta.bmi);
  meta["bmi"] = buf;
  meta["lung_labels"] = "1";
  save_volume(p.labels, out, meta);
  if (!mu_out.empty()) {
    save_volume(materialize_attenuation(p.labels, p.table), mu_out, meta);
  }
  if (!mask_out.empty()) {
    save_volume(lung_mask(p.labels, p.meta), mask_out, meta);
  }
  std::printf("phantom %s: dims %dx%dx%d, twin %s\n", out.c_str(), dims[0],
              dims[1], dims[2], p.meta.twin_id.c_str());
  return kExitOk;
}

int cmd_lesion_synth(std::uint64_t seed, double diameter, double irregularity,
                     const std::string& margin, const ClbParams& clb,
                     const std::string& id, const std::string& out) {
  LesionSpec spec;
  spec.lesion_id = id;
  spec.diameter_mm = diameter;
  spec.shape_seed = mix_seed(seed, kStageLesionShape);
  spec.texture_seed = mix_seed(seed, kStageLesionTexture);
  spec.shape_irregularity = irregularity;
  spec.margin = margin_from_string(margin);
  const LesionVolume lv = synthesize_lesion(spec, clb);

  VolumeMeta meta;
  meta["lesion_id"] = id;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", lv.diameter_measured_mm);
  meta["diameter_measured_mm"] = buf;
  save_volume(lv.hu, out, meta);
  save_volume(lv.mask, out + "_mask", meta);
  std::printf("lesion %s: measured diameter %.2f mm, grid %d^3\n", out.c_str(),
              lv.diameter_measured_mm, lv.mask.dims[0]);
  return kExitOk;
}

int cmd_lesion_embed(const std::string& phantom_path,
                     const std::string& lesion_stem, std::uint64_t seed,
                     double clearance, int attempts, double energy_kev,
                     const std::string& out, const std::string& mask_out) {
  const VoxelVolume labels = load_volume(phantom_path);
  if (labels.kind != VolumeKind::MaterialLabel) {
    throw ConfigError("--phantom must be a material-label volume");
  }
  const MaterialTable table = MaterialTable::builtin(energy_kev);
  PhantomMetadata meta;
  meta.age_years = 60.0;
  meta.bmi = 26.0;
  const VoxelVolume lung = lung_mask(labels, meta);
  const VoxelVolume mu = materialize_attenuation(labels, table);
  const LesionVolume lesion = load_lesion(lesion_stem);

  RandomStream rng(mix_seed(seed, kStagePlacement));
  const PlacementResult placement =
      place_lesion(lung, lesion, {}, rng, clearance, attempts);
  auto [embedded, lesion_bin] = embed_lesion(mu, table, lesion, placement);

  VolumeMeta side;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%.6g", placement.center_mm[0],
                placement.center_mm[1], placement.center_mm[2]);
  side["lesion_center_mm"] = buf;
  save_volume(embedded, out, side);
  if (!mask_out.empty()) save_volume(lesion_bin, mask_out, side);
  std::printf("embedded at (%.1f, %.1f, %.1f) mm after %d attempts\n",
              placement.center_mm[0], placement.center_mm[1],
              placement.center_mm[2], placement.attempts_used);
  return kExitOk;
}

int cmd_ct_simulate(const std::string& volume_path, const std::string& scanner_name,
                    const std::string& filter, double i0, double spr,
                    std::uint64_t seed, bool no_noise, double energy_kev,
                    const std::string& slices_str, int out_dim,
                    double out_spacing, const std::string& out,
                    const std::string& sino_out) {
  const VoxelVolume mu = attenuation_from(volume_path, energy_kev);
  ScannerConfig cfg = builtin_scanner(scanner_name);
  cfg.filter_cutoff = parse_hann_filter(filter);
  cfg.i0 = i0;

  std::vector<double> slices;
  double z0 = 0.0, z1 = 0.0, pitch = 0.0;
  if (std::sscanf(slices_str.c_str(), "%lf:%lf:%lf", &z0, &z1, &pitch) == 3) {
    if (!(pitch > 0.0)) throw ConfigError("slice pitch must be > 0");
    for (double z = z0; z <= z1 + 1e-9; z += pitch) slices.push_back(z);
  } else if (std::sscanf(slices_str.c_str(), "%lf", &z0) == 1) {
    slices.push_back(z0);
  } else {
    throw ConfigError("--slices must be <z> or <z0>:<z1>:<pitch>");
  }

  ScanOptions opts;
  opts.out_dims = {out_dim, out_dim};
  opts.out_spacing_mm = out_spacing;
  opts.seed = seed;
  opts.spr = spr;
  opts.noise = !no_noise;

  const double mu_water = MaterialTable::builtin(energy_kev).mu_water_per_mm();
  const ReconVolume recon = simulate_scan(mu, cfg, slices, mu_water, opts);

  VolumeMeta meta;
  meta["scanner"] = cfg.name;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", cfg.filter_cutoff);
  meta["filter_cutoff"] = buf;
  std::snprintf(buf, sizeof(buf), "%.6g", cfg.i0);
  meta["i0"] = buf;
  save_volume(recon.hu, out, meta);

  if (!sino_out.empty()) {
    const Sinogram sino = forward_project(mu, cfg, slices.front());
    save_sinogram(sino, sino_out);
  }
  std::printf("scan %s: %zu slice(s), %s hann %.2f\n", out.c_str(),
              slices.size(), cfg.name.c_str(), cfg.filter_cutoff);
  return kExitOk;
}

int cmd_label(const std::string& model_path, double threshold,
              const std::string& mode, std::uint64_t seed, double age,
              const std::string& sex, double size, const std::string& margin,
              const std::string& location, const std::string& type) {
  const LogisticModel model =
      model_path.empty() ? default_model() : load_model(model_path);
  NoduleFeatures f;
  f.age_years = age;
  f.sex = sex == "M" ? 'M' : 'F';
  f.size_mm = size;
  f.margin = margin;
  f.location = lobe_from_string(location);
  f.nodule_type = nodule_type_feature_from_string(type);

  LabelMode m;
  if (mode == "det") {
    m = LabelMode::Deterministic;
  } else if (mode == "bern") {
    m = LabelMode::Bernoulli;
  } else {
    throw ConfigError("--mode must be det or bern");
  }
  RandomStream rng(mix_seed(seed, kStageLabel));
  const LabeledNodule labeled = assign_label(f, model, threshold, rng, m);

  json j;
  j["probability"] = labeled.probability;
  j["label"] = labeled.malignant ? "malignant" : "benign";
  j["threshold_used"] = labeled.threshold_used;
  std::printf("%s\n", j.dump().c_str());
  return kExitOk;
}

int cmd_export(const std::string& volume_path, const std::string& mask_path,
               const std::string& scan_id, const std::string& rows_path,
               const std::string& out_dir) {
  VolumeMeta vmeta;
  ReconVolume recon;
  recon.hu = load_volume(volume_path, &vmeta);
  if (vmeta.count("scanner")) recon.scanner_name = vmeta["scanner"];
  if (vmeta.count("filter_cutoff")) {
    recon.filter_cutoff = std::stod(vmeta["filter_cutoff"]);
  }
  const VoxelVolume mask = load_volume(mask_path);

  std::vector<Annotation> rows;
  if (!rows_path.empty()) rows = read_manifest(rows_path).rows;
  const std::vector<Annotation> exported =
      export_scan(recon, scan_id, mask, rows, out_dir);

  // Merge into the dataset manifest, replacing earlier rows for this scan.
  Manifest manifest;
  manifest.tool_version = kVersion;
  const std::string manifest_path =
      (fs::path(out_dir) / "manifest.csv").string();
  if (fs::exists(manifest_path)) {
    manifest = read_manifest(manifest_path);
    std::erase_if(manifest.rows,
                  [&](const Annotation& a) { return a.scan_id == scan_id; });
  }
  manifest.rows.insert(manifest.rows.end(), exported.begin(), exported.end());
  write_manifest(manifest, manifest_path);
  std::printf("exported %s (%zu annotation rows)\n", scan_id.c_str(),
              exported.size());
  return kExitOk;
}

int cmd_qc_dice(const std::string& pred_path, const std::string& truth_path) {
  const VoxelVolume pred = load_volume(pred_path);
  const VoxelVolume truth = load_volume(truth_path);
  const OverlapReport r = dice(pred, truth);
  json j;
  j["dice"] = r.dice;
  j["intersection_voxels"] = r.intersection_voxels;
  j["pred_voxels"] = r.a_voxels;
  j["truth_voxels"] = r.b_voxels;
  std::printf("%s\n", j.dump().c_str());
  return kExitOk;
}

int cmd_pipeline_run(const std::string& config_path, bool seed_set,
                     std::uint64_t seed, const std::string& out_override,
                     int threads) {
  PipelineConfig cfg = parse_config(config_path);
  if (seed_set) cfg.seed = seed;
  if (!out_override.empty()) cfg.output_dir = out_override;
  if (threads > 0) cfg.n_threads = threads;
  cfg.validate();

  const PipelineResult result = run_pipeline(cfg);
  std::printf("pipeline: %d twin(s) ok, %d failed, %zu scan(s), %d row(s)\n",
              result.n_twins_ok, result.n_twins_failed,
              result.scan_ids.size(), static_cast<int>(result.manifest.rows.size()));
  return result.n_twins_failed > 0 ? kExitPartial : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synlungs: annotated synthetic lung-CT dataset generator"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  // --seed/--threads may appear after the subcommand.
  app.fallthrough();

  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("--seed", seed, "global random seed")->capture_default_str();
  app.add_option("--threads", threads, "worker threads (0 = hardware)")
      ->capture_default_str();

  // phantom gen
  auto* phantom = app.add_subcommand("phantom", "phantom operations");
  phantom->require_subcommand(1);
  auto* pg = phantom->add_subcommand("gen", "generate a chest phantom");
  std::string pg_dims = "96,96,64", pg_spacing = "2.5,2.5,3.0";
  double pg_energy = 60.0;
  std::string pg_out, pg_mu, pg_mask;
  pg->add_option("--dims", pg_dims, "nx,ny,nz")->capture_default_str();
  pg->add_option("--spacing", pg_spacing, "mm per axis")->capture_default_str();
  pg->add_option("--energy", pg_energy, "effective keV")->capture_default_str();
  pg->add_option("--out", pg_out, "label volume output stem")->required();
  pg->add_option("--mu-out", pg_mu, "also write attenuation volume");
  pg->add_option("--mask-out", pg_mask, "also write lung mask");

  // lesion synth / embed
  auto* lesion = app.add_subcommand("lesion", "lesion operations");
  lesion->require_subcommand(1);
  auto* ls = lesion->add_subcommand("synth", "synthesize a nodule");
  double ls_diameter = 10.0, ls_irregularity = 0.3;
  std::string ls_margin = "Smooth", ls_id = "l00", ls_out;
  ClbParams ls_clb;
  ls->add_option("--diameter", ls_diameter, "mm")->capture_default_str();
  ls->add_option("--irregularity", ls_irregularity, "[0,1]")->capture_default_str();
  ls->add_option("--margin", ls_margin, "Smooth|Lobulated|Spiculated")
      ->capture_default_str();
  ls->add_option("--id", ls_id, "lesion id")->capture_default_str();
  ls->add_option("--clb-clusters", ls_clb.mean_clusters_per_cm3,
                 "mean clusters per cm^3")->capture_default_str();
  ls->add_option("--clb-lumps", ls_clb.mean_lumps_per_cluster,
                 "mean lumps per cluster")->capture_default_str();
  ls->add_option("--clb-sigma", ls_clb.cluster_sigma_mm, "cluster sigma mm")
      ->capture_default_str();
  ls->add_option("--clb-radius", ls_clb.lump_radius_mm, "lump radius mm")
      ->capture_default_str();
  ls->add_option("--clb-amplitude", ls_clb.lump_amplitude_hu, "lump HU")
      ->capture_default_str();
  ls->add_option("--clb-background", ls_clb.background_hu, "background HU")
      ->capture_default_str();
  ls->add_option("--out", ls_out, "output stem (writes <stem> and <stem>_mask)")
      ->required();

  auto* le = lesion->add_subcommand("embed", "place and embed a nodule");
  std::string le_phantom, le_lesion, le_out, le_mask;
  double le_clearance = 2.0, le_energy = 60.0;
  int le_attempts = 2000;
  le->add_option("--phantom", le_phantom, "label volume (.mhd)")->required();
  le->add_option("--lesion", le_lesion, "lesion stem from `lesion synth`")
      ->required();
  le->add_option("--clearance", le_clearance, "wall clearance mm")
      ->capture_default_str();
  le->add_option("--attempts", le_attempts, "max placement attempts")
      ->capture_default_str();
  le->add_option("--energy", le_energy, "effective keV")->capture_default_str();
  le->add_option("--out", le_out, "embedded attenuation volume")->required();
  le->add_option("--mask-out", le_mask, "downsampled lesion mask");

  // ct simulate
  auto* ct = app.add_subcommand("ct", "CT acquisition");
  ct->require_subcommand(1);
  auto* cs = ct->add_subcommand("simulate", "simulate + reconstruct a scan");
  std::string cs_volume, cs_scanner = "W12", cs_filter = "hann:1.0";
  std::string cs_slices = "0", cs_out, cs_sino;
  double cs_i0 = 2.0e5, cs_spr = 0.05, cs_spacing = 1.5, cs_energy = 60.0;
  int cs_dim = 128;
  bool cs_no_noise = false;
  cs->add_option("--volume", cs_volume, "labels or attenuation .mhd")->required();
  cs->add_option("--scanner", cs_scanner, "W12|W20")->capture_default_str();
  cs->add_option("--filter", cs_filter, "hann:<cutoff>")->capture_default_str();
  cs->add_option("--i0", cs_i0, "photons per detector cell")->capture_default_str();
  cs->add_option("--spr", cs_spr, "scatter-to-primary ratio")->capture_default_str();
  cs->add_flag("--no-noise", cs_no_noise, "skip quantum noise");
  cs->add_option("--slices", cs_slices, "<z> or <z0>:<z1>:<pitch> (mm)")
      ->capture_default_str();
  cs->add_option("--out-dims", cs_dim, "square recon grid size (pixels)")
      ->capture_default_str();
  cs->add_option("--out-spacing", cs_spacing, "recon voxel mm")
      ->capture_default_str();
  cs->add_option("--energy", cs_energy, "effective keV")->capture_default_str();
  cs->add_option("--out", cs_out, "HU volume output")->required();
  cs->add_option("--save-sinogram", cs_sino, "also write the noise-free sinogram");

  // label
  auto* lb = app.add_subcommand("label", "malignancy probability + label");
  std::string lb_model, lb_mode = "det", lb_sex = "F", lb_margin = "Smooth";
  std::string lb_location = "LowerLobe", lb_type = "Solid";
  double lb_threshold = 0.5, lb_age = 60.0, lb_size = 8.0;
  lb->add_option("--model", lb_model, "model JSON (default: built-in)");
  lb->add_option("--threshold", lb_threshold, "decision threshold")
      ->capture_default_str();
  lb->add_option("--mode", lb_mode, "det|bern")->capture_default_str();
  lb->add_option("--age", lb_age, "years")->capture_default_str();
  lb->add_option("--sex", lb_sex, "M|F")->capture_default_str();
  lb->add_option("--size", lb_size, "mm")->capture_default_str();
  lb->add_option("--margin", lb_margin, "Smooth|Lobulated|Spiculated")
      ->capture_default_str();
  lb->add_option("--location", lb_location, "UpperLobe|MiddleLobe|LowerLobe")
      ->capture_default_str();
  lb->add_option("--type", lb_type, "Solid|PartSolid|GroundGlass")
      ->capture_default_str();

  // export
  auto* ex = app.add_subcommand("export", "copy a scan into a dataset tree");
  std::string ex_volume, ex_mask, ex_scan_id, ex_rows, ex_dir;
  ex->add_option("--volume", ex_volume, "recon HU volume")->required();
  ex->add_option("--mask", ex_mask, "instance mask volume")->required();
  ex->add_option("--scan-id", ex_scan_id, "scan id")->required();
  ex->add_option("--rows", ex_rows, "annotation CSV for this scan");
  ex->add_option("--out-dir", ex_dir, "dataset root")->required();

  // qc dice
  auto* qc = app.add_subcommand("qc", "dataset QC");
  qc->require_subcommand(1);
  auto* qd = qc->add_subcommand("dice", "overlap of two masks");
  std::string qd_pred, qd_truth;
  qd->add_option("--pred", qd_pred, "predicted mask .mhd")->required();
  qd->add_option("--truth", qd_truth, "truth mask .mhd")->required();

  // pipeline run
  auto* pl = app.add_subcommand("pipeline", "end-to-end dataset generation");
  pl->require_subcommand(1);
  auto* pr = pl->add_subcommand("run", "run the full pipeline from a config");
  std::string pr_config, pr_out;
  pr->add_option("--config", pr_config, "JSON config path")->required();
  pr->add_option("--out-dir", pr_out, "override output_dir");

  CLI11_PARSE(app, argc, argv);

  try {
    if (threads > 0) set_default_thread_count(threads);

    if (pg->parsed()) {
      return cmd_phantom_gen(seed, pg_dims, pg_spacing, pg_energy, pg_out,
                             pg_mu, pg_mask);
    }
    if (ls->parsed()) {
      return cmd_lesion_synth(seed, ls_diameter, ls_irregularity, ls_margin,
                              ls_clb, ls_id, ls_out);
    }
    if (le->parsed()) {
      return cmd_lesion_embed(le_phantom, le_lesion, seed, le_clearance,
                              le_attempts, le_energy, le_out, le_mask);
    }
    if (cs->parsed()) {
      return cmd_ct_simulate(cs_volume, cs_scanner, cs_filter, cs_i0, cs_spr,
                             seed, cs_no_noise, cs_energy, cs_slices, cs_dim,
                             cs_spacing, cs_out, cs_sino);
    }
    if (lb->parsed()) {
      return cmd_label(lb_model, lb_threshold, lb_mode, seed, lb_age, lb_sex,
                       lb_size, lb_margin, lb_location, lb_type);
    }
    if (ex->parsed()) {
      return cmd_export(ex_volume, ex_mask, ex_scan_id, ex_rows, ex_dir);
    }
    if (qd->parsed()) {
      return cmd_qc_dice(qd_pred, qd_truth);
    }
    if (pr->parsed()) {
      const bool seed_set = app.count("--seed") > 0;
      return cmd_pipeline_run(pr_config, seed_set, seed, pr_out, threads);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const ValidationError& e) {
    // Bad argument values are user configuration mistakes, not failures.
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitPartial;
  }
  return kExitOk;
}
