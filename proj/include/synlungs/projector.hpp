#pragma once

#include "synlungs/scanner.hpp"
#include "synlungs/volume.hpp"

namespace synlungs {

// Fan-beam line integrals of one axial slice (the one containing slice_z).
// Source orbits the isocenter at siso_d over 2*pi across n_views; each
// detector cell center defines one ray, traced with incremental voxel
// stepping (exact chord lengths). Rays missing the grid contribute 0.
Sinogram forward_project(const VoxelVolume& mu, const ScannerConfig& cfg,
                         double slice_z, int n_threads = 0);

// Line integral of mu along one in-plane segment src -> dst (mm) within the
// slice containing slice_z. Building block of forward_project, exposed for
// analytic checks against known chord lengths.
double line_integral(const VoxelVolume& mu, double slice_z,
                     std::array<double, 2> src, std::array<double, 2> dst);

// Exact adjoint of forward_project restricted to the same slice: smears each
// sinogram value back along its ray, weighted by the traversed chord length
// in each voxel. Output grid matches `like` (single slice at slice_z).
// Serial; used for operator sanity checks, not reconstruction.
VoxelVolume backproject_adjoint(const Sinogram& s, const VoxelVolume& like,
                                double slice_z);

}  // namespace synlungs
