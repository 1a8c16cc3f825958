#include "synlungs/volume_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "synlungs/errors.hpp"
#include "synlungs/scanner.hpp"

static_assert(std::endian::native == std::endian::little,
              "raw volume I/O assumes a little-endian host");

namespace synlungs {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string strip_mhd(const std::string& path) {
  if (path.size() > 4 && path.substr(path.size() - 4) == ".mhd") {
    return path.substr(0, path.size() - 4);
  }
  return path;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

ElementType element_type_from_string(const std::string& s) {
  if (s == "MET_UCHAR") return ElementType::UChar;
  if (s == "MET_SHORT") return ElementType::Short;
  if (s == "MET_FLOAT") return ElementType::Float;
  throw IoError("unsupported MetaImage element type: " + s);
}

template <typename T>
void write_raw(const VoxelVolume& v, const std::string& raw_path) {
  std::vector<T> buf(v.values.size());
  for (std::size_t i = 0; i < v.values.size(); ++i) {
    const float f = v.values[i];
    if constexpr (std::is_integral_v<T>) {
      const double lo = static_cast<double>(std::numeric_limits<T>::min());
      const double hi = static_cast<double>(std::numeric_limits<T>::max());
      const double r = std::nearbyint(static_cast<double>(f));
      if (!(r >= lo && r <= hi) || r != static_cast<double>(f)) {
        throw IoError("value " + std::to_string(f) +
                      " not representable as " +
                      std::string(std::is_signed_v<T> ? "MET_SHORT" : "MET_UCHAR"));
      }
      buf[i] = static_cast<T>(r);
    } else {
      buf[i] = static_cast<T>(f);
    }
  }
  std::ofstream out(raw_path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + raw_path);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(T)));
  if (!out) throw IoError("short write: " + raw_path);
}

template <typename T>
void read_raw(VoxelVolume& v, const std::string& raw_path) {
  std::ifstream in(raw_path, std::ios::binary);
  if (!in) throw IoError("cannot open for read: " + raw_path);
  std::vector<T> buf(v.voxel_count());
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(T)));
  if (static_cast<std::size_t>(in.gcount()) != buf.size() * sizeof(T)) {
    throw IoError("raw file truncated: " + raw_path);
  }
  v.values.resize(buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    v.values[i] = static_cast<float>(buf[i]);
  }
}

}  // namespace

void save_volume(const VoxelVolume& volume, const std::string& path,
                 const VolumeMeta& meta) {
  volume.validate();
  const std::string stem = strip_mhd(path);
  const fs::path raw_path = fs::path(stem + ".raw");
  const std::string raw_name = raw_path.filename().string();

  {
    std::ofstream mhd(stem + ".mhd");
    if (!mhd) throw IoError("cannot open for write: " + stem + ".mhd");
    mhd << "ObjectType = Image\n"
        << "NDims = 3\n"
        << "BinaryData = True\n"
        << "BinaryDataByteOrderMSB = False\n"
        << "CompressedData = False\n"
        << "TransformMatrix = 1 0 0 0 1 0 0 0 1\n"
        << "Offset = " << fmt_double(volume.origin[0]) << ' '
        << fmt_double(volume.origin[1]) << ' ' << fmt_double(volume.origin[2])
        << "\n"
        << "CenterOfRotation = 0 0 0\n"
        << "AnatomicalOrientation = RAI\n"
        << "ElementSpacing = " << fmt_double(volume.spacing[0]) << ' '
        << fmt_double(volume.spacing[1]) << ' '
        << fmt_double(volume.spacing[2]) << "\n"
        << "DimSize = " << volume.dims[0] << ' ' << volume.dims[1] << ' '
        << volume.dims[2] << "\n"
        << "ElementType = " << to_string(volume.element_type) << "\n"
        << "ElementDataFile = " << raw_name << "\n";
    if (!mhd) throw IoError("short write: " + stem + ".mhd");
  }

  switch (volume.element_type) {
    case ElementType::UChar: write_raw<std::uint8_t>(volume, raw_path.string()); break;
    case ElementType::Short: write_raw<std::int16_t>(volume, raw_path.string()); break;
    case ElementType::Float: write_raw<float>(volume, raw_path.string()); break;
  }

  json side;
  side["kind"] = to_string(volume.kind);
  for (const auto& [k, v] : meta) side[k] = v;
  std::ofstream js(stem + ".json");
  if (!js) throw IoError("cannot open for write: " + stem + ".json");
  js << side.dump(2) << "\n";
}

VoxelVolume load_volume(const std::string& path, VolumeMeta* meta) {
  const std::string stem = strip_mhd(path);
  const std::string mhd_path = stem + ".mhd";
  std::ifstream mhd(mhd_path);
  if (!mhd) throw IoError("cannot open for read: " + mhd_path);

  VoxelVolume v;
  std::string element_data_file;
  std::string element_type_str = "MET_FLOAT";
  std::string line;
  while (std::getline(mhd, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      s = (b == std::string::npos) ? "" : s.substr(b, e - b + 1);
    };
    trim(key);
    trim(val);
    std::istringstream iss(val);
    if (key == "DimSize") {
      iss >> v.dims[0] >> v.dims[1] >> v.dims[2];
    } else if (key == "ElementSpacing") {
      iss >> v.spacing[0] >> v.spacing[1] >> v.spacing[2];
    } else if (key == "Offset") {
      iss >> v.origin[0] >> v.origin[1] >> v.origin[2];
    } else if (key == "ElementType") {
      element_type_str = val;
    } else if (key == "ElementDataFile") {
      element_data_file = val;
    } else if (key == "BinaryDataByteOrderMSB") {
      if (val == "True") throw IoError("big-endian MetaImage not supported");
    } else if (key == "CompressedData") {
      if (val == "True") throw IoError("compressed MetaImage not supported");
    } else if (key == "NDims") {
      int n = 0;
      iss >> n;
      if (n != 3) throw IoError("only 3-D MetaImage is supported");
    }
  }
  if (element_data_file.empty() || element_data_file == "LIST" ||
      element_data_file == "LOCAL") {
    throw IoError("MetaImage must reference a single raw file: " + mhd_path);
  }
  v.element_type = element_type_from_string(element_type_str);
  for (int a = 0; a < 3; ++a) {
    if (v.dims[a] < 1) throw IoError("bad DimSize in " + mhd_path);
    if (!(v.spacing[a] > 0.0)) throw IoError("bad ElementSpacing in " + mhd_path);
  }

  const fs::path raw_path = fs::path(mhd_path).parent_path() / element_data_file;
  switch (v.element_type) {
    case ElementType::UChar: read_raw<std::uint8_t>(v, raw_path.string()); break;
    case ElementType::Short: read_raw<std::int16_t>(v, raw_path.string()); break;
    case ElementType::Float: read_raw<float>(v, raw_path.string()); break;
  }

  // Sidecar JSON restores the semantic kind; default by element type if absent.
  v.kind = (v.element_type == ElementType::UChar) ? VolumeKind::MaterialLabel
                                                  : VolumeKind::HU;
  const std::string side_path = stem + ".json";
  if (fs::exists(side_path)) {
    std::ifstream js(side_path);
    json side = json::parse(js, nullptr, true);
    if (side.contains("kind")) {
      v.kind = volume_kind_from_string(side["kind"].get<std::string>());
    }
    if (meta) {
      for (auto it = side.begin(); it != side.end(); ++it) {
        if (it.key() == "kind") continue;
        (*meta)[it.key()] = it.value().is_string()
                                ? it.value().get<std::string>()
                                : it.value().dump();
      }
    }
  }
  return v;
}

void save_sinogram(const Sinogram& s, const std::string& path) {
  s.validate();
  if (s.n_rows != 1) throw IoError("only single-row sinograms are stored");
  VoxelVolume shim({s.n_cols, s.n_views, 1}, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0},
                   VolumeKind::Sinogram);
  shim.values.assign(s.data.begin(), s.data.end());

  const ScannerConfig& g = s.geometry;
  VolumeMeta meta;
  auto put = [&meta](const char* key, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    meta[key] = buf;
  };
  meta["scanner_name"] = g.name;
  put("collimation_mm", g.collimation_mm);
  put("siso_d_mm", g.siso_d_mm);
  put("sid_mm", g.sid_mm);
  put("n_channels", g.n_channels);
  put("channel_width_mm", g.channel_width_mm);
  put("anode_angle_deg", g.anode_angle_deg);
  put("n_views", g.n_views);
  put("n_detector_cols", g.n_detector_cols);
  put("i0", g.i0);
  put("filter_cutoff", g.filter_cutoff);
  save_volume(shim, path, meta);
}

Sinogram load_sinogram(const std::string& path) {
  VolumeMeta meta;
  const VoxelVolume shim = load_volume(path, &meta);
  if (shim.kind != VolumeKind::Sinogram) {
    throw IoError("not a sinogram file: " + path);
  }
  auto get = [&meta, &path](const char* key) {
    const auto it = meta.find(key);
    if (it == meta.end()) {
      throw IoError("sinogram sidecar missing " + std::string(key) + ": " + path);
    }
    return std::stod(it->second);
  };
  Sinogram s;
  s.geometry.name = meta.count("scanner_name") ? meta["scanner_name"] : "custom";
  s.geometry.collimation_mm = get("collimation_mm");
  s.geometry.siso_d_mm = get("siso_d_mm");
  s.geometry.sid_mm = get("sid_mm");
  s.geometry.n_channels = static_cast<int>(get("n_channels"));
  s.geometry.channel_width_mm = get("channel_width_mm");
  s.geometry.anode_angle_deg = get("anode_angle_deg");
  s.geometry.n_views = static_cast<int>(get("n_views"));
  s.geometry.n_detector_cols = static_cast<int>(get("n_detector_cols"));
  s.geometry.i0 = get("i0");
  s.geometry.filter_cutoff = get("filter_cutoff");

  s.n_views = shim.dims[1];
  s.n_rows = shim.dims[2];
  s.n_cols = shim.dims[0];
  if (s.n_views != s.geometry.n_views ||
      s.n_cols != s.geometry.n_detector_cols) {
    throw IoError("sinogram dims disagree with sidecar geometry: " + path);
  }
  s.view_angles.resize(s.n_views);
  for (int v = 0; v < s.n_views; ++v) {
    s.view_angles[v] = 2.0 * std::numbers::pi * v / s.n_views;
  }
  s.data.assign(shim.values.begin(), shim.values.end());
  s.validate();
  return s;
}

}  // namespace synlungs
