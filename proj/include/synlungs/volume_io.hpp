#pragma once

#include <map>
#include <string>

#include "synlungs/volume.hpp"

namespace synlungs {

// Free-form metadata carried alongside a volume in a JSON sidecar
// (<stem>.json next to the .mhd). String-valued to keep round trips exact.
using VolumeMeta = std::map<std::string, std::string>;

// Writes <path>.mhd + <path>.raw (+ <path>.json when meta is non-empty).
// `path` may or may not carry the .mhd suffix. Element bytes follow
// volume.element_type; little-endian, z-slowest (MET_UCHAR / MET_SHORT /
// MET_FLOAT). Values outside the representable range of the element type
// are an error.
void save_volume(const VoxelVolume& volume, const std::string& path,
                 const VolumeMeta& meta = {});

// Loads an .mhd written by save_volume (or a compatible local-data
// MetaImage). Sidecar JSON, when present, is returned through `meta`.
VoxelVolume load_volume(const std::string& path, VolumeMeta* meta = nullptr);

// Sinograms ride in the same header+raw container (cols fastest, then
// views); the sidecar carries the scanner geometry with kind "sinogram".
struct Sinogram;  // scanner.hpp
void save_sinogram(const Sinogram& s, const std::string& path);
Sinogram load_sinogram(const std::string& path);

}  // namespace synlungs
