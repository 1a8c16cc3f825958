#include "synlungs/recon.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "synlungs/errors.hpp"
#include "synlungs/fft.hpp"
#include "synlungs/materials.hpp"
#include "synlungs/threading.hpp"

namespace synlungs {

namespace {
constexpr double kPi = std::numbers::pi;
// Fan-beam FBP constant: the ramp kernel enters the equispaced-detector
// formula as h/2 (each line is covered twice over a full rotation).
constexpr double kFanKernelScale = 0.5;
}  // namespace

FilterTaps hann_ramp_filter(int n_cols, double detector_pitch_at_iso,
                            double cutoff) {
  if (n_cols < 2) throw ValidationError("filter needs n_cols >= 2");
  if (!(detector_pitch_at_iso > 0.0)) {
    throw ValidationError("detector pitch must be > 0");
  }
  if (!(cutoff > 0.0)) throw ValidationError("filter cutoff must be > 0");

  FilterTaps taps;
  taps.detector_pitch = detector_pitch_at_iso;
  taps.cutoff = cutoff;
  // Generous padding keeps the circular convolution linear and the
  // frequency-sampled ramp close to its continuous ideal.
  taps.n_fft = static_cast<int>(next_pow2(8u * static_cast<unsigned>(n_cols)));
  taps.gain.assign(taps.n_fft, 0.0);

  const double f_nyquist = 1.0 / (2.0 * detector_pitch_at_iso);
  const double f_w = cutoff * f_nyquist;  // window null
  const double df = 1.0 / (taps.n_fft * detector_pitch_at_iso);
  for (int k = 0; k < taps.n_fft; ++k) {
    const int k_signed = k <= taps.n_fft / 2 ? k : k - taps.n_fft;
    const double f = std::abs(k_signed) * df;
    if (f > f_w || f > f_nyquist) continue;  // gain stays 0
    taps.gain[k] = f * 0.5 * (1.0 + std::cos(kPi * f / f_w));
  }
  return taps;
}

std::vector<double> filter_row(const std::vector<double>& row,
                               const FilterTaps& taps) {
  if (static_cast<int>(row.size()) > taps.n_fft) {
    throw ValidationError("row longer than the filter's FFT length");
  }
  std::vector<std::complex<double>> buf(taps.n_fft, {0.0, 0.0});
  for (std::size_t i = 0; i < row.size(); ++i) buf[i] = row[i];
  fft(buf, false);
  for (int k = 0; k < taps.n_fft; ++k) buf[k] *= taps.gain[k];
  fft(buf, true);
  std::vector<double> out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) out[i] = buf[i].real();
  return out;
}

VoxelVolume fbp_reconstruct(const Sinogram& s, const ScannerConfig& cfg,
                            const std::array<int, 2>& out_dims,
                            double out_spacing, int n_threads) {
  s.validate();
  if (s.n_rows != 1) {
    throw ValidationError("fbp_reconstruct takes a single-row sinogram");
  }
  if (out_dims[0] < 1 || out_dims[1] < 1 || !(out_spacing > 0.0)) {
    throw ValidationError("bad reconstruction grid");
  }
  {
    const auto [lo, hi] =
        std::minmax_element(s.view_angles.begin(), s.view_angles.end());
    const double span = *hi - *lo + 2.0 * kPi / s.n_views;
    if (span + 1e-9 < kPi + 2.0 * cfg.fan_half_angle_rad()) {
      throw ValidationError("insufficient angular coverage for FBP");
    }
  }

  const int n_cols = s.n_cols;
  const double pitch = cfg.detector_pitch_at_iso();
  const double d_src = cfg.siso_d_mm;
  const double half_span = 0.5 * (n_cols - 1);
  const FilterTaps taps = hann_ramp_filter(n_cols, pitch, cfg.filter_cutoff);

  // Cosine pre-weight then ramp-filter every view.
  std::vector<double> filtered(static_cast<std::size_t>(s.n_views) * n_cols);
  parallel_for(
      s.n_views,
      [&](std::int64_t begin, std::int64_t end) {
        std::vector<double> row(n_cols);
        for (std::int64_t v = begin; v < end; ++v) {
          for (int m = 0; m < n_cols; ++m) {
            const double sm = (m - half_span) * pitch;
            row[m] = s.at(static_cast<int>(v), m) * d_src /
                     std::sqrt(d_src * d_src + sm * sm);
          }
          const std::vector<double> q = filter_row(row, taps);
          std::copy(q.begin(), q.end(),
                    filtered.begin() + static_cast<std::size_t>(v) * n_cols);
        }
      },
      n_threads);

  const std::array<int, 3> dims{out_dims[0], out_dims[1], 1};
  const std::array<double, 3> sp{out_spacing, out_spacing, out_spacing};
  VoxelVolume out(dims, sp, centered_origin(dims, sp),
                  VolumeKind::AttenuationPerMm);

  const double dbeta = 2.0 * kPi / s.n_views;
  std::vector<double> cosb(s.n_views), sinb(s.n_views);
  for (int v = 0; v < s.n_views; ++v) {
    cosb[v] = std::cos(s.view_angles[v]);
    sinb[v] = std::sin(s.view_angles[v]);
  }

  parallel_for(
      out_dims[1],
      [&](std::int64_t jb, std::int64_t je) {
        for (std::int64_t j = jb; j < je; ++j) {
          const double y = out.origin[1] + j * out_spacing;
          for (int i = 0; i < out_dims[0]; ++i) {
            const double x = out.origin[0] + i * out_spacing;
            double acc = 0.0;
            for (int v = 0; v < s.n_views; ++v) {
              // Distance along the central ray and the virtual-detector
              // coordinate of this pixel.
              const double d_par = d_src - (x * cosb[v] + y * sinb[v]);
              if (d_par <= 1e-6) continue;
              const double t_perp = -x * sinb[v] + y * cosb[v];
              const double s_virt = t_perp * d_src / d_par;
              const double pos = s_virt / pitch + half_span;
              const int m0 = static_cast<int>(std::floor(pos));
              if (m0 < -1 || m0 > n_cols - 1) continue;
              const double frac = pos - m0;
              const std::size_t base = static_cast<std::size_t>(v) * n_cols;
              const double q0 = m0 >= 0 ? filtered[base + m0] : 0.0;
              const double q1 = m0 + 1 < n_cols ? filtered[base + m0 + 1] : 0.0;
              const double u = d_par / d_src;
              acc += ((1.0 - frac) * q0 + frac * q1) / (u * u);
            }
            const double mu = kFanKernelScale * dbeta * acc;
            out.at(i, static_cast<int>(j), 0) =
                static_cast<float>(std::max(mu, 0.0));
          }
        }
      },
      n_threads);
  return out;
}

VoxelVolume mu_to_hu_volume(const VoxelVolume& mu, double mu_water_per_mm) {
  if (!(mu_water_per_mm > 0.0)) throw ValidationError("mu_water must be > 0");
  VoxelVolume hu(mu.dims, mu.spacing, mu.origin, VolumeKind::HU);
  for (std::size_t n = 0; n < mu.values.size(); ++n) {
    hu.values[n] = static_cast<float>(
        mu_to_hu(mu.values[n], mu_water_per_mm));
  }
  return hu;
}

}  // namespace synlungs
