#include "synlungs/projector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "synlungs/errors.hpp"
#include "synlungs/threading.hpp"

namespace synlungs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One axial slice of the attenuation grid plus its world-space footprint.
struct Slice2D {
  const float* mu = nullptr;  // x-fastest, ny rows
  float* accum = nullptr;     // adjoint target (exclusive with mu)
  int nx = 0, ny = 0;
  double dx = 0.0, dy = 0.0;
  double x0 = 0.0, y0 = 0.0;  // min edge of voxel (0,0)
};

// Walks the segment S->E through the slice. In integrate mode returns the
// line integral; in splat mode adds w * chord_length into accum instead.
double trace_ray(const Slice2D& g, double sx, double sy, double ex, double ey,
                 double splat_w, bool splat) {
  const double dirx = ex - sx, diry = ey - sy;
  const double len = std::hypot(dirx, diry);
  if (len < 1e-12) return 0.0;
  const double ux = dirx / len, uy = diry / len;

  // Clip the segment against the grid box.
  double t0 = 0.0, t1 = len;
  const double gx1 = g.x0 + g.nx * g.dx, gy1 = g.y0 + g.ny * g.dy;
  if (std::abs(ux) > 1e-15) {
    double ta = (g.x0 - sx) / ux, tb = (gx1 - sx) / ux;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  } else if (sx < g.x0 || sx >= gx1) {
    return 0.0;
  }
  if (std::abs(uy) > 1e-15) {
    double ta = (g.y0 - sy) / uy, tb = (gy1 - sy) / uy;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  } else if (sy < g.y0 || sy >= gy1) {
    return 0.0;
  }
  if (t0 >= t1) return 0.0;

  // Entry voxel, then incremental axis stepping (Amanatides–Woo).
  const double px = sx + (t0 + 1e-9) * ux, py = sy + (t0 + 1e-9) * uy;
  int i = static_cast<int>(std::floor((px - g.x0) / g.dx));
  int j = static_cast<int>(std::floor((py - g.y0) / g.dy));
  i = std::clamp(i, 0, g.nx - 1);
  j = std::clamp(j, 0, g.ny - 1);

  const int step_i = ux > 0 ? 1 : -1;
  const int step_j = uy > 0 ? 1 : -1;
  const double t_delta_x = std::abs(ux) > 1e-15 ? g.dx / std::abs(ux) : kInf;
  const double t_delta_y = std::abs(uy) > 1e-15 ? g.dy / std::abs(uy) : kInf;

  double t_next_x = kInf, t_next_y = kInf;
  if (std::abs(ux) > 1e-15) {
    const double edge = g.x0 + (ux > 0 ? i + 1 : i) * g.dx;
    t_next_x = (edge - sx) / ux;
  }
  if (std::abs(uy) > 1e-15) {
    const double edge = g.y0 + (uy > 0 ? j + 1 : j) * g.dy;
    t_next_y = (edge - sy) / uy;
  }

  double sum = 0.0;
  double t = t0;
  while (t < t1) {
    const double t_exit = std::min({t_next_x, t_next_y, t1});
    const double seg = t_exit - t;
    if (seg > 0.0) {
      const std::size_t idx = static_cast<std::size_t>(j) * g.nx + i;
      if (splat) {
        g.accum[idx] += static_cast<float>(splat_w * seg);
      } else {
        sum += g.mu[idx] * seg;
      }
    }
    if (t_exit >= t1) break;
    if (t_next_x <= t_next_y) {
      i += step_i;
      t_next_x += t_delta_x;
      if (i < 0 || i >= g.nx) break;
    } else {
      j += step_j;
      t_next_y += t_delta_y;
      if (j < 0 || j >= g.ny) break;
    }
    t = t_exit;
  }
  return sum;
}

int slice_index_for_z(const VoxelVolume& v, double slice_z) {
  const int k = static_cast<int>(
      std::floor((slice_z - v.origin[2]) / v.spacing[2] + 0.5));
  if (k < 0 || k >= v.dims[2]) {
    throw ValidationError("slice_z outside the volume");
  }
  return k;
}

Slice2D make_slice(const VoxelVolume& v, int k) {
  Slice2D g;
  g.nx = v.dims[0];
  g.ny = v.dims[1];
  g.dx = v.spacing[0];
  g.dy = v.spacing[1];
  g.x0 = v.origin[0] - 0.5 * v.spacing[0];
  g.y0 = v.origin[1] - 0.5 * v.spacing[1];
  return g;
}

}  // namespace

Sinogram forward_project(const VoxelVolume& mu, const ScannerConfig& cfg,
                         double slice_z, int n_threads) {
  if (mu.kind != VolumeKind::AttenuationPerMm) {
    throw ValidationError("forward_project expects an attenuation volume");
  }
  cfg.validate();
  const int k = slice_index_for_z(mu, slice_z);

  Slice2D g = make_slice(mu, k);
  g.mu = mu.values.data() + mu.index(0, 0, k);

  Sinogram s;
  s.geometry = cfg;
  s.n_views = cfg.n_views;
  s.n_rows = 1;
  s.n_cols = cfg.n_detector_cols;
  s.view_angles.resize(cfg.n_views);
  s.data.assign(static_cast<std::size_t>(cfg.n_views) * cfg.n_detector_cols,
                0.0f);
  for (int v = 0; v < cfg.n_views; ++v) {
    s.view_angles[v] = 2.0 * std::numbers::pi * v / cfg.n_views;
  }

  const double half_span = 0.5 * (cfg.n_detector_cols - 1);
  parallel_for(
      cfg.n_views,
      [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t v = begin; v < end; ++v) {
          const double beta = s.view_angles[v];
          const double cb = std::cos(beta), sb = std::sin(beta);
          const double srcx = cfg.siso_d_mm * cb, srcy = cfg.siso_d_mm * sb;
          // Detector center opposite the source; cells along the tangent.
          const double dcx = -(cfg.sid_mm - cfg.siso_d_mm) * cb;
          const double dcy = -(cfg.sid_mm - cfg.siso_d_mm) * sb;
          const double tx = -sb, ty = cb;
          for (int m = 0; m < cfg.n_detector_cols; ++m) {
            const double off = (m - half_span) * cfg.channel_width_mm;
            const double ex = dcx + off * tx, ey = dcy + off * ty;
            s.at(static_cast<int>(v), m) = static_cast<float>(
                trace_ray(g, srcx, srcy, ex, ey, 0.0, false));
          }
        }
      },
      n_threads);
  return s;
}

double line_integral(const VoxelVolume& mu, double slice_z,
                     std::array<double, 2> src, std::array<double, 2> dst) {
  if (mu.kind != VolumeKind::AttenuationPerMm) {
    throw ValidationError("line_integral expects an attenuation volume");
  }
  const int k = slice_index_for_z(mu, slice_z);
  Slice2D g = make_slice(mu, k);
  g.mu = mu.values.data() + mu.index(0, 0, k);
  return trace_ray(g, src[0], src[1], dst[0], dst[1], 0.0, false);
}

VoxelVolume backproject_adjoint(const Sinogram& s, const VoxelVolume& like,
                                double slice_z) {
  const ScannerConfig& cfg = s.geometry;
  const int k = slice_index_for_z(like, slice_z);

  VoxelVolume out(like.dims, like.spacing, like.origin,
                  VolumeKind::AttenuationPerMm);
  Slice2D g = make_slice(like, k);
  g.accum = out.values.data() + out.index(0, 0, k);

  const double half_span = 0.5 * (cfg.n_detector_cols - 1);
  for (int v = 0; v < s.n_views; ++v) {
    const double beta = s.view_angles[v];
    const double cb = std::cos(beta), sb = std::sin(beta);
    const double srcx = cfg.siso_d_mm * cb, srcy = cfg.siso_d_mm * sb;
    const double dcx = -(cfg.sid_mm - cfg.siso_d_mm) * cb;
    const double dcy = -(cfg.sid_mm - cfg.siso_d_mm) * sb;
    const double tx = -sb, ty = cb;
    for (int m = 0; m < s.n_cols; ++m) {
      const double off = (m - half_span) * cfg.channel_width_mm;
      const double ex = dcx + off * tx, ey = dcy + off * ty;
      trace_ray(g, srcx, srcy, ex, ey, s.at(v, m), true);
    }
  }
  return out;
}

}  // namespace synlungs
