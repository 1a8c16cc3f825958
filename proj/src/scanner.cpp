#include "synlungs/scanner.hpp"

#include <cmath>

#include "synlungs/errors.hpp"

namespace synlungs {

double ScannerConfig::fan_half_angle_rad() const {
  // Half the detector span seen from the source.
  return std::atan2(0.5 * n_detector_cols * channel_width_mm, sid_mm);
}

void ScannerConfig::validate() const {
  if (!(sid_mm > siso_d_mm) || !(siso_d_mm > 0.0)) {
    throw ValidationError("scanner must satisfy sid > siso_d > 0");
  }
  if (n_views < 4) throw ValidationError("n_views must be >= 4");
  if (n_detector_cols < 2) throw ValidationError("n_detector_cols must be >= 2");
  if (!(i0 > 0.0)) throw ValidationError("i0 must be > 0");
  if (!(filter_cutoff > 0.0)) throw ValidationError("filter cutoff must be > 0");
  if (!(channel_width_mm > 0.0)) throw ValidationError("channel width must be > 0");
}

ScannerConfig builtin_scanner(const std::string& name) {
  ScannerConfig c;
  c.name = name;
  if (name == "W12") {
    c.collimation_mm = 12.0;
    c.siso_d_mm = 570.0;
    c.sid_mm = 1040.0;
    c.n_channels = 16;
    c.channel_width_mm = 1.5;
    c.anode_angle_deg = 7.0;
    c.n_views = 1000;
    c.n_detector_cols = 672;
  } else if (name == "W20") {
    c.collimation_mm = 20.0;
    c.siso_d_mm = 541.0;
    c.sid_mm = 949.0;
    c.n_channels = 16;
    c.channel_width_mm = 2.19;
    c.anode_angle_deg = 8.0;
    c.n_views = 1000;
    c.n_detector_cols = 512;
  } else {
    throw ConfigError("unknown scanner: " + name + " (use W12 or W20)");
  }
  c.validate();
  return c;
}

void Sinogram::validate() const {
  geometry.validate();
  if (n_views < 1 || n_rows < 1 || n_cols < 2) {
    throw ValidationError("sinogram dims invalid");
  }
  if (view_angles.size() != static_cast<std::size_t>(n_views)) {
    throw ValidationError("view_angles length mismatch");
  }
  if (data.size() != static_cast<std::size_t>(n_views) * n_rows * n_cols) {
    throw ValidationError("sinogram data length mismatch");
  }
  for (float v : data) {
    if (!std::isfinite(v)) throw ValidationError("sinogram values must be finite");
  }
}

}  // namespace synlungs
