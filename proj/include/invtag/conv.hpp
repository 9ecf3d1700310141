#pragma once

#include <vector>

#include "invtag/grid.hpp"

namespace invtag {

/// Discrete Gaussian taps, half-width ceil(4*sigma), renormalized to unit sum.
/// sigma == 0 yields the single-tap identity kernel.
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian blur with clamp-to-edge boundaries. Unit DC gain:
/// constants pass through exactly.
Volume conv_gaussian(const Volume& v, double sx, double sy, double sz);

/// Exact adjoint of conv_gaussian (including the edge mass folded back by the
/// clamp), so that <conv(x), y> == <x, conv_adjoint(y)> up to rounding.
Volume conv_gaussian_adjoint(const Volume& v, double sx, double sy, double sz);

/// 1D Gaussian filter along a single grid axis (0 = x, 1 = y, 2 = z).
Volume conv_gaussian_axis(const Volume& v, int axis, double sigma);

}  // namespace invtag
