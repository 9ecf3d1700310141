#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "invtag/grid.hpp"

namespace invtag {

/// One interpolation cell: base corner, in-cell fractions, and per-axis clamp
/// masks (0 when the pre-clamp coordinate is strictly outside the domain, so
/// position derivatives vanish there).
struct LinCell {
    int i0, j0, k0;
    double fx, fy, fz;
    double mx, my, mz;
};

namespace detail {

inline void locate_axis(int n, double x, int& i0, double& f, double& mask) {
    mask = (x >= 0.0 && x <= double(n - 1)) ? 1.0 : 0.0;
    double q = x < 0.0 ? 0.0 : (x > double(n - 1) ? double(n - 1) : x);
    int i = int(std::floor(q));
    if (i > n - 2) i = n - 2;
    i0 = i;
    f = q - double(i);
}

// Lower-cell tie rule: at integer coordinates the gradient is taken from the
// cell below, so repeated runs pick the same one-sided slope.
inline void locate_axis_lower(int n, double x, int& i0, double& f, double& mask) {
    mask = (x >= 0.0 && x <= double(n - 1)) ? 1.0 : 0.0;
    double q = x < 0.0 ? 0.0 : (x > double(n - 1) ? double(n - 1) : x);
    int i = int(std::ceil(q)) - 1;
    if (i < 0) i = 0;
    if (i > n - 2) i = n - 2;
    i0 = i;
    f = q - double(i);
}

}  // namespace detail

inline LinCell locate_value(const GridSpec& g, double x, double y, double z) {
    LinCell c;
    detail::locate_axis(g.nx, x, c.i0, c.fx, c.mx);
    detail::locate_axis(g.ny, y, c.j0, c.fy, c.my);
    detail::locate_axis(g.nz, z, c.k0, c.fz, c.mz);
    return c;
}

inline LinCell locate_grad(const GridSpec& g, double x, double y, double z) {
    LinCell c;
    detail::locate_axis_lower(g.nx, x, c.i0, c.fx, c.mx);
    detail::locate_axis_lower(g.ny, y, c.j0, c.fy, c.my);
    detail::locate_axis_lower(g.nz, z, c.k0, c.fz, c.mz);
    return c;
}

/// Trilinear value of `d` (x-fastest layout on `g`) in cell `c`.
template <typename T>
inline double cell_value(const GridSpec& g, const T* d, const LinCell& c) {
    const std::int64_t base = g.index(c.i0, c.j0, c.k0);
    const std::int64_t sx = 1, sy = g.nx, sz = std::int64_t(g.nx) * g.ny;
    const double c000 = d[base], c100 = d[base + sx];
    const double c010 = d[base + sy], c110 = d[base + sy + sx];
    const double c001 = d[base + sz], c101 = d[base + sz + sx];
    const double c011 = d[base + sz + sy], c111 = d[base + sz + sy + sx];
    const double x0 = 1.0 - c.fx, y0 = 1.0 - c.fy, z0 = 1.0 - c.fz;
    return z0 * (y0 * (x0 * c000 + c.fx * c100) + c.fy * (x0 * c010 + c.fx * c110)) +
           c.fz * (y0 * (x0 * c001 + c.fx * c101) + c.fy * (x0 * c011 + c.fx * c111));
}

/// Spatial gradient of the trilinear interpolant in cell `c`, clamp-masked.
template <typename T>
inline std::array<double, 3> cell_grad(const GridSpec& g, const T* d, const LinCell& c) {
    const std::int64_t base = g.index(c.i0, c.j0, c.k0);
    const std::int64_t sx = 1, sy = g.nx, sz = std::int64_t(g.nx) * g.ny;
    const double c000 = d[base], c100 = d[base + sx];
    const double c010 = d[base + sy], c110 = d[base + sy + sx];
    const double c001 = d[base + sz], c101 = d[base + sz + sx];
    const double c011 = d[base + sz + sy], c111 = d[base + sz + sy + sx];
    const double x0 = 1.0 - c.fx, y0 = 1.0 - c.fy, z0 = 1.0 - c.fz;
    double gx = z0 * (y0 * (c100 - c000) + c.fy * (c110 - c010)) +
                c.fz * (y0 * (c101 - c001) + c.fy * (c111 - c011));
    double gy = z0 * ((x0 * c010 + c.fx * c110) - (x0 * c000 + c.fx * c100)) +
                c.fz * ((x0 * c011 + c.fx * c111) - (x0 * c001 + c.fx * c101));
    double gz = (y0 * (x0 * c001 + c.fx * c101) + c.fy * (x0 * c011 + c.fx * c111)) -
                (y0 * (x0 * c000 + c.fx * c100) + c.fy * (x0 * c010 + c.fx * c110));
    return {gx * c.mx, gy * c.my, gz * c.mz};
}

/// Adds `val` into the 8 corners of the value cell at (x, y, z): the exact
/// adjoint of clamp-to-edge trilinear sampling. Scatter; callers serialize.
inline void splat_add(const GridSpec& g, double* acc, double x, double y, double z, double val) {
    const LinCell c = locate_value(g, x, y, z);
    const std::int64_t base = g.index(c.i0, c.j0, c.k0);
    const std::int64_t sx = 1, sy = g.nx, sz = std::int64_t(g.nx) * g.ny;
    const double x0 = 1.0 - c.fx, y0 = 1.0 - c.fy, z0 = 1.0 - c.fz;
    acc[base] += val * z0 * y0 * x0;
    acc[base + sx] += val * z0 * y0 * c.fx;
    acc[base + sy] += val * z0 * c.fy * x0;
    acc[base + sy + sx] += val * z0 * c.fy * c.fx;
    acc[base + sz] += val * c.fz * y0 * x0;
    acc[base + sz + sx] += val * c.fz * y0 * c.fx;
    acc[base + sz + sy] += val * c.fz * c.fy * x0;
    acc[base + sz + sy + sx] += val * c.fz * c.fy * c.fx;
}

inline double sample_nearest_at(const Volume& v, double x, double y, double z) {
    const GridSpec& g = v.grid;
    auto near = [](int n, double q) {
        if (q < 0.0) q = 0.0;
        if (q > double(n - 1)) q = double(n - 1);
        return int(std::floor(q + 0.5));
    };
    return v.data[size_t(g.index(near(g.nx, x), near(g.ny, y), near(g.nz, z)))];
}

inline double sample_trilinear_at(const Volume& v, double x, double y, double z) {
    return cell_value(v.grid, v.data.data(), locate_value(v.grid, x, y, z));
}

inline std::array<double, 3> sample_trilinear_grad_at(const Volume& v, double x, double y, double z) {
    return cell_grad(v.grid, v.data.data(), locate_grad(v.grid, x, y, z));
}

inline std::array<double, 3> sample_field_at(const VectorField& f, double x, double y, double z) {
    const LinCell c = locate_value(f.grid, x, y, z);
    return {cell_value(f.grid, f.comp[0].data(), c), cell_value(f.grid, f.comp[1].data(), c),
            cell_value(f.grid, f.comp[2].data(), c)};
}

/// Batch forms of the two sampling entry points. Non-finite points are
/// rejected with the offending index.
std::vector<double> sample_trilinear(const Volume& v, std::span<const std::array<double, 3>> pts);
std::vector<std::array<double, 3>> sample_trilinear_grad(const Volume& v,
                                                         std::span<const std::array<double, 3>> pts);

}  // namespace invtag
