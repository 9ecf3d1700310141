#pragma once

#include <span>
#include <utility>

#include "invtag/grid.hpp"
#include "invtag/motion.hpp"

namespace invtag {

/// PSNR after min-max normalization of both inputs to their shared dynamic
/// range. Identical inputs return +inf.
double psnr(const Volume& x, const Volume& y);

/// Mean SSIM over the volume: Gaussian window sigma 1.5 with 7^3 support,
/// K1 = 0.01, K2 = 0.03, replicate boundaries, inputs normalized to the
/// shared dynamic range (L = 1).
double ssim(const Volume& x, const Volume& y);

/// Mean and 95th-percentile (nearest-rank) endpoint error between two
/// displacement fields, over voxels where `fg` exceeds `fg_threshold`.
std::pair<double, double> epe(const VectorField& u_est, const VectorField& u_gt, const Volume& fg,
                              double fg_threshold = 0.05);

/// Percentage of interior voxels with a negative Jacobian determinant.
double negdet_pct(const DeformField& d);

/// Baseline: 1D Gaussian low-pass along each tag orientation, averaged.
Volume lowpass_fuse(std::span<const Volume> g3, double sigma_c);

/// Baseline: per orientation, band-pass the +f0 harmonic (ball of radius
/// f0/2 in cycles/voxel), inverse DFT, complex magnitude; average over
/// orientations and scale by 2 (single-sideband amplitude restoration).
Volume harp_demodulate(std::span<const Volume> g3, double tag_spacing);

}  // namespace invtag
