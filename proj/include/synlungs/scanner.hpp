#pragma once

#include <string>
#include <vector>

namespace synlungs {

// Fan-beam scanner geometry and acquisition settings. The detector is flat
// with equispaced cells; n_detector_cols cells of channel_width mm span the
// fan at the physical detector (distance sid from the source).
struct ScannerConfig {
  std::string name;
  double collimation_mm = 0.0;
  double siso_d_mm = 0.0;  // source to isocenter
  double sid_mm = 0.0;     // source to detector
  int n_channels = 0;      // detector rows (z); acquisition is per-slice
  double channel_width_mm = 0.0;
  double anode_angle_deg = 0.0;  // provenance only, no physical effect
  int n_views = 0;
  int n_detector_cols = 0;
  double i0 = 2.0e5;  // expected unattenuated counts per detector cell
  double filter_cutoff = 1.0;  // Hann cutoff, fraction of detector Nyquist

  // Cell pitch scaled back to the isocenter, which is the resolution the
  // filter works at.
  double detector_pitch_at_iso() const {
    return channel_width_mm * siso_d_mm / sid_mm;
  }
  double fan_half_angle_rad() const;

  void validate() const;
};

// W12 and W20 presets.
ScannerConfig builtin_scanner(const std::string& name);

// Line integrals (mu * mm), one row per slice acquisition: data indexed
// [view * n_cols + col]. view_angles[v] is the source azimuth.
struct Sinogram {
  int n_views = 0;
  int n_rows = 1;
  int n_cols = 0;
  std::vector<double> view_angles;  // radians
  std::vector<float> data;
  ScannerConfig geometry;

  std::size_t index(int view, int col) const {
    return static_cast<std::size_t>(view) * n_cols + col;
  }
  float at(int view, int col) const { return data[index(view, col)]; }
  float& at(int view, int col) { return data[index(view, col)]; }

  void validate() const;
};

}  // namespace synlungs
