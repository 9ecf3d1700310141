#pragma once

#include "invtag/grid.hpp"

namespace invtag {

/// Exact 3D DFT (no padding, no fast-size tricks): separable per-axis
/// transforms, O(n) per output sample per axis. Plenty for desk-scale grids
/// and keeps the contract bit-for-bit independent of FFT library behavior.
ComplexVolume dft3_forward(const Volume& v);
ComplexVolume dft3_forward(const ComplexVolume& v);

/// Full complex inverse (1/N normalization).
ComplexVolume dft3_inverse_c(const ComplexVolume& c);

/// Real part of the inverse; optionally reports the largest |imaginary part|
/// so callers can assert Hermitian inputs.
Volume dft3_inverse(const ComplexVolume& c, double* max_imag = nullptr);

}  // namespace invtag
