#include "synlungs/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "synlungs/errors.hpp"
#include "synlungs/volume_io.hpp"

namespace synlungs {

namespace fs = std::filesystem;

void Annotation::validate() const {
  if (scan_id.empty() || lesion_id.empty()) {
    throw ValidationError("annotation ids must be non-empty");
  }
  if (!(diameter_mm > 0.0)) throw ValidationError("diameter must be > 0");
  for (int a = 0; a < 3; ++a) {
    if (center_mm[a] < bbox_min_mm[a] || center_mm[a] > bbox_max_mm[a]) {
      throw ValidationError("bbox must contain the center");
    }
    // Slack covers 6-significant-digit CSV round trips of mm coordinates.
    if (bbox_max_mm[a] - bbox_min_mm[a] + 5e-3 < diameter_mm) {
      throw ValidationError("bbox edges must be >= diameter");
    }
  }
  if (probability < 0.0 || probability > 1.0) {
    throw ValidationError("probability must be in [0,1]");
  }
}

void Manifest::validate() const {
  std::set<std::pair<std::string, std::string>> seen;
  for (const Annotation& a : rows) {
    a.validate();
    if (!seen.insert({a.scan_id, a.lesion_id}).second) {
      throw ValidationError("duplicate (scan_id, lesion_id): " + a.scan_id +
                            ", " + a.lesion_id);
    }
  }
}

std::vector<Annotation> export_scan(const ReconVolume& recon,
                                    const std::string& scan_id,
                                    const VoxelVolume& instance_mask,
                                    std::vector<Annotation> annotations,
                                    const std::string& out_dir) {
  if (scan_id.empty()) throw ValidationError("scan_id must be non-empty");
  if (!recon.hu.same_grid(instance_mask)) {
    throw ValidationError("mask grid does not match the reconstruction grid");
  }
  fs::create_directories(fs::path(out_dir) / "volumes");
  fs::create_directories(fs::path(out_dir) / "masks");

  VolumeMeta meta;
  meta["scan_id"] = scan_id;
  meta["scanner"] = recon.scanner_name;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", recon.filter_cutoff);
  meta["filter_cutoff"] = buf;
  save_volume(recon.hu, (fs::path(out_dir) / "volumes" / scan_id).string(),
              meta);
  save_volume(instance_mask, (fs::path(out_dir) / "masks" / scan_id).string(),
              meta);

  const std::string mask_rel = "masks/" + scan_id + ".mhd";
  for (Annotation& a : annotations) {
    a.scan_id = scan_id;
    a.mask_path = mask_rel;
    a.validate();
  }
  return annotations;
}

namespace {

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void write_manifest(const Manifest& m, const std::string& path) {
  m.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);
  out << kManifestHeader << "\n";
  // Deterministic ordering regardless of assembly order.
  std::vector<const Annotation*> rows;
  rows.reserve(m.rows.size());
  for (const Annotation& a : m.rows) rows.push_back(&a);
  std::sort(rows.begin(), rows.end(), [](const Annotation* x, const Annotation* y) {
    return std::tie(x->scan_id, x->lesion_id) < std::tie(y->scan_id, y->lesion_id);
  });
  for (const Annotation* a : rows) {
    out << a->scan_id << ',' << a->lesion_id << ',' << fmt6(a->center_mm[0])
        << ',' << fmt6(a->center_mm[1]) << ',' << fmt6(a->center_mm[2]) << ','
        << fmt6(a->diameter_mm) << ',' << fmt6(a->bbox_min_mm[0]) << ','
        << fmt6(a->bbox_min_mm[1]) << ',' << fmt6(a->bbox_min_mm[2]) << ','
        << fmt6(a->bbox_max_mm[0]) << ',' << fmt6(a->bbox_max_mm[1]) << ','
        << fmt6(a->bbox_max_mm[2]) << ',' << a->mask_path << ','
        << fmt6(a->probability) << ','
        << (a->malignant ? "malignant" : "benign") << ',' << a->scanner << ','
        << fmt6(a->filter_cutoff) << "\n";
  }
  if (!out) throw IoError("short write: " + path);
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for read: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty manifest: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader) {
    throw IoError("unexpected manifest header in " + path);
  }

  Manifest m;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 17) {
      throw IoError("manifest row " + std::to_string(lineno) + " has " +
                    std::to_string(f.size()) + " fields, expected 17");
    }
    Annotation a;
    try {
      a.scan_id = f[0];
      a.lesion_id = f[1];
      for (int i = 0; i < 3; ++i) a.center_mm[i] = std::stod(f[2 + i]);
      a.diameter_mm = std::stod(f[5]);
      for (int i = 0; i < 3; ++i) a.bbox_min_mm[i] = std::stod(f[6 + i]);
      for (int i = 0; i < 3; ++i) a.bbox_max_mm[i] = std::stod(f[9 + i]);
      a.mask_path = f[12];
      a.probability = std::stod(f[13]);
      if (f[14] == "malignant") {
        a.malignant = true;
      } else if (f[14] == "benign") {
        a.malignant = false;
      } else {
        throw IoError("bad label value: " + f[14]);
      }
      a.scanner = f[15];
      a.filter_cutoff = std::stod(f[16]);
    } catch (const std::invalid_argument&) {
      throw IoError("malformed number in manifest row " + std::to_string(lineno));
    }
    m.rows.push_back(std::move(a));
  }
  m.validate();
  return m;
}

VoxelVolume resample_volume(const VoxelVolume& v,
                            const std::array<double, 3>& target_spacing) {
  for (double t : target_spacing) {
    if (!(t > 0.0)) throw ValidationError("target spacing must be > 0");
  }
  std::array<int, 3> nd;
  std::array<double, 3> norigin;
  for (int a = 0; a < 3; ++a) {
    const double extent = v.dims[a] * v.spacing[a];
    nd[a] = static_cast<int>(std::ceil(extent / target_spacing[a] - 1e-9));
    nd[a] = std::max(nd[a], 1);
    // Same world box; first voxel center half a new voxel inside it.
    norigin[a] = (v.origin[a] - 0.5 * v.spacing[a]) + 0.5 * target_spacing[a];
  }
  VoxelVolume out(nd, target_spacing, norigin, v.kind);
  out.element_type = v.element_type;

  auto sample = [&v](double x, double y, double z) {
    // Continuous index with edge clamping.
    double u[3] = {x, y, z};
    int i0[3];
    double w[3];
    for (int a = 0; a < 3; ++a) {
      double c = (u[a] - v.origin[a]) / v.spacing[a];
      c = std::clamp(c, 0.0, static_cast<double>(v.dims[a] - 1));
      i0[a] = std::min(static_cast<int>(c), v.dims[a] - 2 >= 0 ? v.dims[a] - 2 : 0);
      if (v.dims[a] == 1) i0[a] = 0;
      w[a] = c - i0[a];
      if (v.dims[a] == 1) w[a] = 0.0;
    }
    double acc = 0.0;
    for (int dz = 0; dz < 2; ++dz) {
      const int k = std::min(i0[2] + dz, v.dims[2] - 1);
      const double wz = dz ? w[2] : 1.0 - w[2];
      if (wz == 0.0) continue;
      for (int dy = 0; dy < 2; ++dy) {
        const int j = std::min(i0[1] + dy, v.dims[1] - 1);
        const double wy = dy ? w[1] : 1.0 - w[1];
        if (wy == 0.0) continue;
        for (int dx = 0; dx < 2; ++dx) {
          const int i = std::min(i0[0] + dx, v.dims[0] - 1);
          const double wx = dx ? w[0] : 1.0 - w[0];
          if (wx == 0.0) continue;
          acc += wx * wy * wz * v.at(i, j, k);
        }
      }
    }
    return acc;
  };

  for (int k = 0; k < nd[2]; ++k) {
    for (int j = 0; j < nd[1]; ++j) {
      for (int i = 0; i < nd[0]; ++i) {
        const auto p = out.voxel_center(i, j, k);
        out.at(i, j, k) = static_cast<float>(sample(p[0], p[1], p[2]));
      }
    }
  }
  if (v.kind == VolumeKind::Mask || v.kind == VolumeKind::MaterialLabel) {
    // Keep label volumes integral after interpolation.
    for (float& f : out.values) f = std::nearbyint(f);
  }
  return out;
}

VoxelVolume extract_patch(const VoxelVolume& v,
                          const std::array<double, 3>& center_mm,
                          const std::array<int, 3>& patch_dims,
                          std::array<double, 2> clip, bool standardize) {
  if (v.kind != VolumeKind::HU) {
    throw ValidationError("extract_patch expects an HU volume");
  }
  for (int d : patch_dims) {
    if (d < 1) throw ValidationError("patch dims must be >= 1");
  }
  if (!(clip[0] < clip[1])) throw ValidationError("clip range must be ordered");

  const auto cv = v.voxel_of(center_mm);
  std::array<int, 3> start;
  std::array<double, 3> origin;
  for (int a = 0; a < 3; ++a) {
    start[a] = cv[a] - patch_dims[a] / 2;
    origin[a] = v.origin[a] + start[a] * v.spacing[a];
  }
  VoxelVolume patch(patch_dims, v.spacing, origin, VolumeKind::HU);

  constexpr float kPad = -1000.0f;
  for (int k = 0; k < patch_dims[2]; ++k) {
    for (int j = 0; j < patch_dims[1]; ++j) {
      for (int i = 0; i < patch_dims[0]; ++i) {
        const int si = start[0] + i, sj = start[1] + j, sk = start[2] + k;
        float val = v.in_bounds(si, sj, sk) ? v.at(si, sj, sk) : kPad;
        val = std::clamp(val, static_cast<float>(clip[0]),
                         static_cast<float>(clip[1]));
        patch.at(i, j, k) = val;
      }
    }
  }

  if (standardize) {
    double sum = 0.0;
    for (float f : patch.values) sum += f;
    const double mean = sum / patch.values.size();
    double ss = 0.0;
    for (float f : patch.values) ss += (f - mean) * (f - mean);
    const double sd = std::max(std::sqrt(ss / patch.values.size()), 1e-6);
    for (float& f : patch.values) {
      f = static_cast<float>((f - mean) / sd);
    }
  }
  return patch;
}

}  // namespace synlungs
