#include "synlungs/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include <json.hpp>

#include "synlungs/errors.hpp"
#include "synlungs/noise.hpp"
#include "synlungs/phantom.hpp"
#include "synlungs/projector.hpp"
#include "synlungs/recon.hpp"
#include "synlungs/threading.hpp"
#include "synlungs/version.hpp"
#include "synlungs/volume_io.hpp"

namespace synlungs {

namespace fs = std::filesystem;
using nlohmann::json;

void PipelineConfig::validate() const {
  if (n_twins < 1) throw ConfigError("n_twins must be >= 1");
  if (lesions_min < 0 || lesions_max < lesions_min) {
    throw ConfigError("lesion count range must satisfy 0 <= min <= max");
  }
  try {
    gamma.validate();
    clb.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  if (scanners.empty()) throw ConfigError("scanners must be non-empty");
  for (const std::string& s : scanners) {
    if (s != "W12" && s != "W20") throw ConfigError("unknown scanner: " + s);
  }
  if (filter_cutoffs.empty()) throw ConfigError("filter_cutoffs must be non-empty");
  for (double c : filter_cutoffs) {
    if (!(c > 0.0)) throw ConfigError("filter cutoff must be > 0");
  }
  if (!(i0 > 0.0)) throw ConfigError("i0 must be > 0");
  if (spr < 0.0) throw ConfigError("spr must be >= 0");
  for (int d : phantom_dims) {
    if (d < 32) throw ConfigError("phantom dims must be >= 32");
  }
  for (double s : phantom_spacing_mm) {
    if (!(s > 0.0)) throw ConfigError("phantom spacing must be > 0");
  }
  if (out_dims[0] < 8 || out_dims[1] < 8) throw ConfigError("out_dims too small");
  if (!(out_spacing_mm > 0.0)) throw ConfigError("out_spacing must be > 0");
  if (n_views < 4) throw ConfigError("n_views must be >= 4");
  if (!(slice_pitch_mm > 0.0)) throw ConfigError("slice_pitch must be > 0");
  if (slice_margin_mm < 0.0) throw ConfigError("slice_margin must be >= 0");
  if (irregularity_min < 0.0 || irregularity_max > 1.0 ||
      irregularity_min > irregularity_max) {
    throw ConfigError("irregularity range must be within [0,1], min <= max");
  }
  if (wall_clearance_mm < 0.0) throw ConfigError("wall_clearance must be >= 0");
  if (max_place_attempts < 1) throw ConfigError("max_place_attempts must be >= 1");
  if (threshold < 0.0 || threshold > 1.0) {
    throw ConfigError("threshold must be in [0,1]");
  }
  if (output_dir.empty()) throw ConfigError("output_dir is required");
  if (n_threads < 0) throw ConfigError("n_threads must be >= 0");
  if (!(energy_kev >= 30.0 && energy_kev <= 150.0)) {
    throw ConfigError("energy_kev must be in [30, 150]");
  }
}

namespace {

// Strict field extraction: every consumed key is recorded; leftovers fail.
class StrictObject {
 public:
  StrictObject(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("bad value type for key '" + std::string(key) + "' in " +
                        where_);
    }
  }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ConfigError("unknown key '" + it.key() + "' in " + where_);
      }
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace

PipelineConfig parse_config_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  PipelineConfig c;
  StrictObject root(j, "config");
  if (!root.has("seed") || !root.has("output_dir")) {
    throw ConfigError("config requires 'seed' and 'output_dir'");
  }
  root.get("seed", c.seed);
  root.get("output_dir", c.output_dir);
  root.get("n_twins", c.n_twins);
  if (root.has("lesions_per_twin")) {
    StrictObject r(root.raw("lesions_per_twin"), "lesions_per_twin");
    r.get("min", c.lesions_min);
    r.get("max", c.lesions_max);
    r.finish();
  }
  if (root.has("gamma")) {
    StrictObject g(root.raw("gamma"), "gamma");
    g.get("a", c.gamma.a);
    g.get("b", c.gamma.b);
    g.get("min_size_mm", c.gamma.min_size_mm);
    g.get("max_size_mm", c.gamma.max_size_mm);
    g.finish();
  }
  if (root.has("clb")) {
    StrictObject g(root.raw("clb"), "clb");
    g.get("mean_clusters_per_cm3", c.clb.mean_clusters_per_cm3);
    g.get("mean_lumps_per_cluster", c.clb.mean_lumps_per_cluster);
    g.get("cluster_sigma_mm", c.clb.cluster_sigma_mm);
    g.get("lump_radius_mm", c.clb.lump_radius_mm);
    g.get("lump_amplitude_hu", c.clb.lump_amplitude_hu);
    g.get("background_hu", c.clb.background_hu);
    g.finish();
  }
  root.get("scanners", c.scanners);
  root.get("filter_cutoffs", c.filter_cutoffs);
  root.get("i0", c.i0);
  root.get("spr", c.spr);
  root.get("noise", c.noise);
  root.get("phantom_dims", c.phantom_dims);
  root.get("phantom_spacing_mm", c.phantom_spacing_mm);
  root.get("energy_kev", c.energy_kev);
  root.get("out_dims", c.out_dims);
  root.get("out_spacing_mm", c.out_spacing_mm);
  root.get("n_views", c.n_views);
  root.get("slice_pitch_mm", c.slice_pitch_mm);
  root.get("slice_margin_mm", c.slice_margin_mm);
  root.get("irregularity_min", c.irregularity_min);
  root.get("irregularity_max", c.irregularity_max);
  root.get("wall_clearance_mm", c.wall_clearance_mm);
  root.get("max_place_attempts", c.max_place_attempts);
  root.get("label_model_path", c.label_model_path);
  root.get("threshold", c.threshold);
  if (root.has("label_mode")) {
    std::string mode;
    root.get("label_mode", mode);
    if (mode == "deterministic") {
      c.label_mode = LabelMode::Deterministic;
    } else if (mode == "bernoulli") {
      c.label_mode = LabelMode::Bernoulli;
    } else {
      throw ConfigError("label_mode must be 'deterministic' or 'bernoulli'");
    }
  }
  root.get("n_threads", c.n_threads);
  root.finish();
  c.validate();
  return c;
}

PipelineConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_config_json(text);
}

namespace {

struct PlacedLesion {
  LesionSpec spec;
  LesionVolume volume;
  PlacementResult placement;
  LabeledNodule labeled;
};

struct TwinProduct {
  std::vector<Annotation> rows;
  std::vector<std::string> scan_ids;
  int n_lesions = 0;
  bool failed = false;
  std::string diagnostic;
};

LobeLocation lobe_of(const VoxelVolume& lung, double z_mm) {
  // Thirds of the lung-mask bounding box along z; highest third is upper.
  int k_min = lung.dims[2], k_max = -1;
  for (int k = 0; k < lung.dims[2]; ++k) {
    const std::size_t base = lung.index(0, 0, k);
    const std::size_t n_slice =
        static_cast<std::size_t>(lung.dims[0]) * lung.dims[1];
    for (std::size_t n = 0; n < n_slice; ++n) {
      if (lung.values[base + n] != 0.0f) {
        k_min = std::min(k_min, k);
        k_max = std::max(k_max, k);
        break;
      }
    }
  }
  if (k_max < 0) return LobeLocation::LowerLobe;
  const double z0 = lung.origin[2] + k_min * lung.spacing[2];
  const double z1 = lung.origin[2] + k_max * lung.spacing[2];
  const double f = z1 > z0 ? (z_mm - z0) / (z1 - z0) : 0.5;
  if (f >= 2.0 / 3.0) return LobeLocation::UpperLobe;
  if (f >= 1.0 / 3.0) return LobeLocation::MiddleLobe;
  return LobeLocation::LowerLobe;
}

std::string format_scan_id(const std::string& twin_id,
                           const std::string& scanner, double cutoff) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%s_%s_hann%.2f", twin_id.c_str(),
                scanner.c_str(), cutoff);
  return buf;
}

TwinProduct run_twin(const PipelineConfig& cfg, int twin_index,
                     const LogisticModel& model, int inner_threads) {
  TwinProduct out;
  const std::uint64_t twin_seed =
      mix_seed(cfg.seed, kStageTwin, static_cast<std::uint64_t>(twin_index));

  ChestPhantom phantom = generate_chest_phantom(
      twin_seed, cfg.phantom_dims, cfg.phantom_spacing_mm, cfg.energy_kev);
  char twin_id[32];
  std::snprintf(twin_id, sizeof(twin_id), "twin%03d", twin_index);
  phantom.meta.twin_id = twin_id;

  VoxelVolume mu = materialize_attenuation(phantom.labels, phantom.table);
  const VoxelVolume lung = lung_mask(phantom.labels, phantom.meta);

  RandomStream count_rng(mix_seed(twin_seed, kStageLesionCount));
  const int n_lesions = static_cast<int>(
      count_rng.uniform_int(cfg.lesions_min, cfg.lesions_max));

  std::vector<PlacedLesion> lesions;
  std::vector<PlacementResult> placements;
  for (int l = 0; l < n_lesions; ++l) {
    RandomStream spec_rng(
        mix_seed(twin_seed, kStageLesionSize, static_cast<std::uint64_t>(l)));
    LesionSpec spec;
    char lid[16];
    std::snprintf(lid, sizeof(lid), "l%02d", l);
    spec.lesion_id = lid;
    spec.diameter_mm = sample_size(cfg.gamma, spec_rng);
    spec.shape_seed =
        mix_seed(twin_seed, kStageLesionShape, static_cast<std::uint64_t>(l));
    spec.texture_seed =
        mix_seed(twin_seed, kStageLesionTexture, static_cast<std::uint64_t>(l));
    spec.shape_irregularity =
        spec_rng.uniform(cfg.irregularity_min, cfg.irregularity_max);
    const double margin_draw = spec_rng.uniform();
    spec.margin = margin_draw < 0.40  ? Margin::Smooth
                  : margin_draw < 0.75 ? Margin::Lobulated
                                       : Margin::Spiculated;

    PlacedLesion pl;
    pl.spec = spec;
    pl.volume = synthesize_lesion(spec, cfg.clb);

    RandomStream place_rng(
        mix_seed(twin_seed, kStagePlacement, static_cast<std::uint64_t>(l)));
    pl.placement =
        place_lesion(lung, pl.volume, placements, place_rng,
                     cfg.wall_clearance_mm, cfg.max_place_attempts);
    placements.push_back(pl.placement);

    NoduleFeatures feat;
    feat.age_years = phantom.meta.age_years;
    feat.sex = phantom.meta.sex;
    feat.size_mm = pl.volume.diameter_measured_mm;
    feat.margin = to_string(spec.margin);
    feat.location = lobe_of(lung, pl.placement.center_mm[2]);
    feat.nodule_type = NoduleTypeFeature::Solid;
    RandomStream label_rng(
        mix_seed(twin_seed, kStageLabel, static_cast<std::uint64_t>(l)));
    pl.labeled =
        assign_label(feat, model, cfg.threshold, label_rng, cfg.label_mode);

    auto [embedded, lesion_mask] =
        embed_lesion(mu, phantom.table, pl.volume, pl.placement);
    mu = std::move(embedded);
    (void)lesion_mask;  // ground truth is re-rasterized on the recon grid
    lesions.push_back(std::move(pl));
  }
  out.n_lesions = static_cast<int>(lesions.size());

  // Slice positions covering every lesion (or the lung midline if none).
  double z_lo = 0.0, z_hi = 0.0;
  if (!lesions.empty()) {
    z_lo = 1e30;
    z_hi = -1e30;
    for (const PlacedLesion& pl : lesions) {
      z_lo = std::min(z_lo, pl.placement.center_mm[2] - pl.placement.radius_mm);
      z_hi = std::max(z_hi, pl.placement.center_mm[2] + pl.placement.radius_mm);
    }
    z_lo -= cfg.slice_margin_mm;
    z_hi += cfg.slice_margin_mm;
  } else {
    z_lo = -2.0 * cfg.slice_pitch_mm;
    z_hi = 2.0 * cfg.slice_pitch_mm;
  }
  const double vol_z0 = mu.origin[2];
  const double vol_z1 = mu.origin[2] + (mu.dims[2] - 1) * mu.spacing[2];
  z_lo = std::max(z_lo, vol_z0);
  z_hi = std::min(z_hi, vol_z1);
  std::vector<double> slice_z;
  for (double z = z_lo; z <= z_hi + 1e-9; z += cfg.slice_pitch_mm) {
    slice_z.push_back(z);
  }
  if (slice_z.empty()) slice_z.push_back(0.5 * (vol_z0 + vol_z1));

  const double mu_water = phantom.table.mu_water_per_mm();

  for (std::size_t sc = 0; sc < cfg.scanners.size(); ++sc) {
    ScannerConfig scanner = builtin_scanner(cfg.scanners[sc]);
    scanner.n_views = cfg.n_views;
    scanner.i0 = cfg.i0;

    // One acquisition per (twin, scanner); every cutoff reconstructs from
    // the same noisy projections, the way repeated kernel recons of one
    // scan would.
    std::vector<Sinogram> sinos;
    sinos.reserve(slice_z.size());
    for (std::size_t k = 0; k < slice_z.size(); ++k) {
      Sinogram sino = forward_project(mu, scanner, slice_z[k], inner_threads);
      if (cfg.noise) {
        const std::uint64_t slice_seed =
            mix_seed(twin_seed, kStageAcquisition,
                     static_cast<std::uint64_t>(sc), static_cast<std::uint64_t>(k));
        sino = apply_quantum_noise(sino, scanner, slice_seed, cfg.spr,
                                   inner_threads);
      }
      sinos.push_back(std::move(sino));
    }

    for (double cutoff : cfg.filter_cutoffs) {
      ScannerConfig recon_cfg = scanner;
      recon_cfg.filter_cutoff = cutoff;

      const std::array<int, 3> dims{cfg.out_dims[0], cfg.out_dims[1],
                                    static_cast<int>(slice_z.size())};
      const double pitch =
          slice_z.size() > 1 ? slice_z[1] - slice_z[0] : cfg.slice_pitch_mm;
      const std::array<double, 3> sp{cfg.out_spacing_mm, cfg.out_spacing_mm,
                                     pitch};
      VoxelVolume stack(dims, sp,
                        {-0.5 * (dims[0] - 1) * sp[0],
                         -0.5 * (dims[1] - 1) * sp[1], slice_z.front()},
                        VolumeKind::HU);
      for (std::size_t k = 0; k < slice_z.size(); ++k) {
        const VoxelVolume slice_mu =
            fbp_reconstruct(sinos[k], recon_cfg, cfg.out_dims,
                            cfg.out_spacing_mm, inner_threads);
        const VoxelVolume slice_hu = mu_to_hu_volume(slice_mu, mu_water);
        std::copy(slice_hu.values.begin(), slice_hu.values.end(),
                  stack.values.begin() + stack.index(0, 0, static_cast<int>(k)));
      }

      ReconVolume recon;
      recon.hu = std::move(stack);
      recon.scanner_name = scanner.name;
      recon.filter_cutoff = cutoff;
      recon.i0 = scanner.i0;
      recon.seed = twin_seed;

      // Instance mask on the recon grid, 1-based ids in lesion order.
      VoxelVolume instances(recon.hu.dims, recon.hu.spacing, recon.hu.origin,
                            VolumeKind::Mask);
      for (std::size_t l = 0; l < lesions.size(); ++l) {
        const VoxelVolume one = lesion_mask_on_grid(
            lesions[l].volume, lesions[l].placement.center_mm, recon.hu);
        for (std::size_t n = 0; n < one.values.size(); ++n) {
          if (one.values[n] != 0.0f) {
            instances.values[n] = static_cast<float>(l + 1);
          }
        }
      }

      const std::string scan_id =
          format_scan_id(phantom.meta.twin_id, scanner.name, cutoff);
      std::vector<Annotation> rows;
      for (const PlacedLesion& pl : lesions) {
        Annotation a;
        a.scan_id = scan_id;
        a.lesion_id = pl.spec.lesion_id;
        a.center_mm = pl.placement.center_mm;
        a.diameter_mm = pl.volume.diameter_measured_mm;
        // Tight world box of the 0.1 mm mask, expanded if needed so every
        // edge is at least one diameter (annotation invariant).
        std::array<double, 3> lo{1e30, 1e30, 1e30}, hi{-1e30, -1e30, -1e30};
        const VoxelVolume& lm = pl.volume.mask;
        for (int k = 0; k < lm.dims[2]; ++k) {
          for (int j = 0; j < lm.dims[1]; ++j) {
            for (int i = 0; i < lm.dims[0]; ++i) {
              if (lm.at(i, j, k) == 0.0f) continue;
              const auto p = lm.voxel_center(i, j, k);
              for (int ax = 0; ax < 3; ++ax) {
                lo[ax] = std::min(lo[ax], p[ax]);
                hi[ax] = std::max(hi[ax], p[ax]);
              }
            }
          }
        }
        for (int ax = 0; ax < 3; ++ax) {
          const double r = 0.5 * a.diameter_mm;
          a.bbox_min_mm[ax] = std::min(a.center_mm[ax] + lo[ax],
                                       a.center_mm[ax] - r);
          a.bbox_max_mm[ax] = std::max(a.center_mm[ax] + hi[ax],
                                       a.center_mm[ax] + r);
        }
        a.probability = pl.labeled.probability;
        a.malignant = pl.labeled.malignant;
        a.scanner = scanner.name;
        a.filter_cutoff = cutoff;
        rows.push_back(std::move(a));
      }

      const std::vector<Annotation> exported =
          export_scan(recon, scan_id, instances, rows, cfg.output_dir);
      out.rows.insert(out.rows.end(), exported.begin(), exported.end());
      out.scan_ids.push_back(scan_id);
    }
  }
  return out;
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.output_dir);

  const LogisticModel model = cfg.label_model_path.empty()
                                  ? default_model()
                                  : load_model(cfg.label_model_path);

  const int pool = std::max(
      1, std::min(cfg.n_threads > 0 ? cfg.n_threads : default_thread_count(),
                  cfg.n_twins));
  const int inner_threads = 1;  // twins are the unit of parallelism

  std::vector<TwinProduct> products(cfg.n_twins);
  std::mutex log_mutex;
  auto worker = [&](int twin_index) {
    try {
      products[twin_index] = run_twin(cfg, twin_index, model, inner_threads);
    } catch (const std::exception& e) {
      products[twin_index].failed = true;
      products[twin_index].diagnostic = e.what();
      std::lock_guard<std::mutex> lock(log_mutex);
      std::fprintf(stderr, "twin %d failed: %s\n", twin_index, e.what());
    }
  };

  if (pool == 1) {
    for (int t = 0; t < cfg.n_twins; ++t) worker(t);
  } else {
    std::vector<std::thread> threads;
    std::atomic<int> next{0};
    for (int w = 0; w < pool; ++w) {
      threads.emplace_back([&]() {
        for (;;) {
          const int t = next.fetch_add(1);
          if (t >= cfg.n_twins) return;
          worker(t);
        }
      });
    }
    for (auto& th : threads) th.join();
  }

  PipelineResult result;
  result.manifest.dataset_seed = cfg.seed;
  result.manifest.tool_version = kVersion;
  for (const TwinProduct& p : products) {
    if (p.failed) {
      ++result.n_twins_failed;
      continue;
    }
    ++result.n_twins_ok;
    result.n_lesions_placed += p.n_lesions;
    result.n_lesion_incidences += static_cast<int>(p.rows.size());
    result.manifest.rows.insert(result.manifest.rows.end(), p.rows.begin(),
                                p.rows.end());
    result.scan_ids.insert(result.scan_ids.end(), p.scan_ids.begin(),
                           p.scan_ids.end());
  }
  std::sort(result.scan_ids.begin(), result.scan_ids.end());

  write_manifest(result.manifest,
                 (fs::path(cfg.output_dir) / "manifest.csv").string());

  json meta;
  meta["seed"] = cfg.seed;
  meta["tool_version"] = kVersion;
  meta["n_twins"] = cfg.n_twins;
  meta["n_twins_failed"] = result.n_twins_failed;
  meta["filter_cutoffs"] = cfg.filter_cutoffs;
  meta["scan_ids"] = result.scan_ids;
  meta["scanners"] = json::array();
  for (const std::string& name : cfg.scanners) {
    const ScannerConfig s = builtin_scanner(name);
    meta["scanners"].push_back({{"name", s.name},
                                {"collimation_mm", s.collimation_mm},
                                {"siso_d_mm", s.siso_d_mm},
                                {"sid_mm", s.sid_mm},
                                {"n_channels", s.n_channels},
                                {"channel_width_mm", s.channel_width_mm},
                                {"anode_angle_deg", s.anode_angle_deg},
                                {"n_views", cfg.n_views},
                                {"n_detector_cols", s.n_detector_cols},
                                {"i0", cfg.i0}});
  }
  std::ofstream ds((fs::path(cfg.output_dir) / "dataset.json").string());
  if (!ds) throw IoError("cannot write dataset.json");
  ds << meta.dump(2) << "\n";

  return result;
}

}  // namespace synlungs
