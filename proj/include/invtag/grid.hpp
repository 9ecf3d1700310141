#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "invtag/error.hpp"

namespace invtag {

/// Regular 3D voxel grid, unit spacing, x-fastest storage order.
struct GridSpec {
    int nx = 0, ny = 0, nz = 0;

    // Desk-scale guard so a bad config cannot allocate the machine away.
    static constexpr std::int64_t kMaxVoxels = std::int64_t(1) << 24;

    std::int64_t count() const { return std::int64_t(nx) * ny * nz; }
    bool operator==(const GridSpec&) const = default;

    void validate() const {
        check(nx >= 4 && ny >= 4 && nz >= 4, "grid dims must be >= 4, got %dx%dx%d", nx, ny, nz);
        check(count() <= kMaxVoxels, "grid %dx%dx%d exceeds voxel cap", nx, ny, nz);
    }

    std::int64_t index(int i, int j, int k) const {
        return std::int64_t(i) + std::int64_t(nx) * (std::int64_t(j) + std::int64_t(ny) * k);
    }
};

/// Scalar field on a grid. f32 storage; kernels accumulate in double.
struct Volume {
    GridSpec grid;
    std::vector<float> data;

    Volume() = default;
    explicit Volume(GridSpec g, float fill = 0.0f) : grid(g), data(size_t(g.count()), fill) {}

    float& at(int i, int j, int k) { return data[size_t(grid.index(i, j, k))]; }
    float at(int i, int j, int k) const { return data[size_t(grid.index(i, j, k))]; }

    std::int64_t size() const { return grid.count(); }
};

/// 3-component field on a grid, stored as three component planes (matches the
/// rank-4 IVT layout with the component as the slowest axis).
struct VectorField {
    GridSpec grid;
    std::array<std::vector<float>, 3> comp;

    VectorField() = default;
    explicit VectorField(GridSpec g, float fill = 0.0f) : grid(g) {
        for (auto& c : comp) c.assign(size_t(g.count()), fill);
    }

    float& at(int c, int i, int j, int k) { return comp[size_t(c)][size_t(grid.index(i, j, k))]; }
    float at(int c, int i, int j, int k) const { return comp[size_t(c)][size_t(grid.index(i, j, k))]; }

    std::int64_t size() const { return grid.count(); }

    /// phi(r) = r, in voxel coordinates.
    static VectorField identity_map(GridSpec g) {
        VectorField f(g);
        std::int64_t idx = 0;
        for (int k = 0; k < g.nz; ++k)
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i, ++idx) {
                    f.comp[0][size_t(idx)] = float(i);
                    f.comp[1][size_t(idx)] = float(j);
                    f.comp[2][size_t(idx)] = float(k);
                }
        return f;
    }
};

/// Complex field used by the DFT utilities (double precision throughout).
struct ComplexVolume {
    GridSpec grid;
    std::vector<double> re, im;

    ComplexVolume() = default;
    explicit ComplexVolume(GridSpec g) : grid(g), re(size_t(g.count()), 0.0), im(size_t(g.count()), 0.0) {}

    std::int64_t size() const { return grid.count(); }
};

}  // namespace invtag
