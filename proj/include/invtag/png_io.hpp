#pragma once

#include <string>
#include <vector>

#include "invtag/grid.hpp"

namespace invtag {

/// Minimal 8-bit grayscale PNG writer (zlib-deflated IDAT, filter 0 rows).
void write_png_gray8(const std::string& path, int width, int height,
                     const std::vector<unsigned char>& pixels);

/// Mid-volume slice normalized to [0, 255]. plane: 0 = axial (xy at mid z),
/// 1 = coronal (xz at mid y), 2 = sagittal (yz at mid x).
void write_slice_png(const std::string& path, const Volume& v, int plane);

}  // namespace invtag
