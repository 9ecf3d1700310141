#include "invtag/serial_ref.hpp"

#include <cmath>

#include "invtag/conv.hpp"
#include "invtag/fast_math.hpp"
#include "invtag/interp.hpp"

namespace invtag::serial {

namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

Volume conv_axis(const Volume& in, int axis, const std::vector<double>& w) {
    const GridSpec g = in.grid;
    const int radius = int(w.size() / 2);
    const int n = axis == 0 ? g.nx : (axis == 1 ? g.ny : g.nz);
    const std::int64_t stride = axis == 0 ? 1 : (axis == 1 ? g.nx : std::int64_t(g.nx) * g.ny);
    Volume out(g);
    const std::int64_t nlines = g.count() / n;
    for (std::int64_t line = 0; line < nlines; ++line) {
        std::int64_t base;
        if (axis == 0) {
            base = line * g.nx;
        } else if (axis == 1) {
            const std::int64_t k = line / g.nx, i = line % g.nx;
            base = g.index(int(i), 0, int(k));
        } else {
            base = line;
        }
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int u = -radius; u <= radius; ++u)
                acc += w[size_t(u + radius)] * double(in.data[size_t(base + stride * clampi(i - u, 0, n - 1))]);
            out.data[size_t(base + stride * i)] = float(acc);
        }
    }
    return out;
}

}  // namespace

Volume conv_gaussian(const Volume& v, double sx, double sy, double sz) {
    Volume out = v;
    if (sx != 0.0) out = conv_axis(out, 0, gaussian_kernel(sx));
    if (sy != 0.0) out = conv_axis(out, 1, gaussian_kernel(sy));
    if (sz != 0.0) out = conv_axis(out, 2, gaussian_kernel(sz));
    return out;
}

Volume pullback(const Volume& u, const VectorField& phi) {
    Volume out(u.grid);
    for (std::int64_t i = 0; i < u.size(); ++i)
        out.data[size_t(i)] = float(sample_trilinear_at(
            u, phi.comp[0][size_t(i)], phi.comp[1][size_t(i)], phi.comp[2][size_t(i)]));
    return out;
}

VectorField eval_velocity(const MotionNet& net, const GridSpec& grid) {
    VectorField v(grid);
    const double scale = net.spec.velocity_scale;
    for (int k = 0; k < grid.nz; ++k)
        for (int j = 0; j < grid.ny; ++j)
            for (int i = 0; i < grid.nx; ++i) {
                float x[3] = {float(grid.nx > 1 ? 2.0 * i / (grid.nx - 1) - 1.0 : 0.0),
                              float(grid.ny > 1 ? 2.0 * j / (grid.ny - 1) - 1.0 : 0.0),
                              float(grid.nz > 1 ? 2.0 * k / (grid.nz - 1) - 1.0 : 0.0)};
                std::vector<float> cur(x, x + 3);
                for (size_t l = 0; l < net.W.size(); ++l) {
                    const size_t rows = net.b[l].size(), cols = cur.size();
                    std::vector<float> nxt(rows);
                    for (size_t o = 0; o < rows; ++o) {
                        float acc = net.b[l][o];
                        for (size_t c = 0; c < cols; ++c) acc += net.W[l][o * cols + c] * cur[c];
                        nxt[o] = l + 1 < net.W.size() ? fast_tanhf(acc) : acc;
                    }
                    cur = std::move(nxt);
                }
                const auto idx = size_t(grid.index(i, j, k));
                for (int c = 0; c < 3; ++c)
                    v.comp[size_t(c)][idx] = cur[size_t(c)] * float(scale);
            }
    return v;
}

DeformField exp_velocity(const VectorField& v, int steps) {
    const GridSpec g = v.grid;
    const std::int64_t n = g.count();
    std::array<std::vector<double>, 3> phi;
    for (auto& c : phi) c.resize(size_t(n));
    const double inv = 1.0 / double(std::int64_t(1) << steps);
    for (std::int64_t idx = 0; idx < n; ++idx) {
        const int i = int(idx % g.nx);
        const int j = int((idx / g.nx) % g.ny);
        const int k = int(idx / (std::int64_t(g.nx) * g.ny));
        phi[0][size_t(idx)] = i + double(v.comp[0][size_t(idx)]) * inv;
        phi[1][size_t(idx)] = j + double(v.comp[1][size_t(idx)]) * inv;
        phi[2][size_t(idx)] = k + double(v.comp[2][size_t(idx)]) * inv;
    }
    for (int s = 0; s < steps; ++s) {
        std::array<std::vector<double>, 3> next;
        for (auto& c : next) c.resize(size_t(n));
        for (std::int64_t idx = 0; idx < n; ++idx) {
            const LinCell cell =
                locate_value(g, phi[0][size_t(idx)], phi[1][size_t(idx)], phi[2][size_t(idx)]);
            next[0][size_t(idx)] = cell_value(g, phi[0].data(), cell);
            next[1][size_t(idx)] = cell_value(g, phi[1].data(), cell);
            next[2][size_t(idx)] = cell_value(g, phi[2].data(), cell);
        }
        phi = std::move(next);
    }
    DeformField out{VectorField(g), steps};
    for (int c = 0; c < 3; ++c)
        for (std::int64_t idx = 0; idx < n; ++idx)
            out.phi.comp[size_t(c)][size_t(idx)] = float(phi[size_t(c)][size_t(idx)]);
    return out;
}

ComplexVolume dft3_forward(const Volume& v) {
    const GridSpec g = v.grid;
    ComplexVolume c(g);
    for (std::int64_t i = 0; i < v.size(); ++i) c.re[size_t(i)] = double(v.data[size_t(i)]);
    for (int axis = 0; axis < 3; ++axis) {
        const int n = axis == 0 ? g.nx : (axis == 1 ? g.ny : g.nz);
        const std::int64_t stride = axis == 0 ? 1 : (axis == 1 ? g.nx : std::int64_t(g.nx) * g.ny);
        const size_t nz = size_t(n);
        std::vector<double> wr(nz), wi(nz);
        for (int m = 0; m < n; ++m) {
            wr[size_t(m)] = std::cos(-2.0 * M_PI * m / n);
            wi[size_t(m)] = std::sin(-2.0 * M_PI * m / n);
        }
        ComplexVolume out(g);
        const std::int64_t nlines = g.count() / n;
        for (std::int64_t line = 0; line < nlines; ++line) {
            std::int64_t base;
            if (axis == 0) {
                base = line * g.nx;
            } else if (axis == 1) {
                const std::int64_t k = line / g.nx, i = line % g.nx;
                base = g.index(int(i), 0, int(k));
            } else {
                base = line;
            }
            for (int f = 0; f < n; ++f) {
                double sre = 0.0, sim = 0.0;
                std::int64_t m = 0;
                for (int r = 0; r < n; ++r) {
                    const double xr = c.re[size_t(base + stride * r)];
                    const double xi = c.im[size_t(base + stride * r)];
                    sre += xr * wr[size_t(m)] - xi * wi[size_t(m)];
                    sim += xr * wi[size_t(m)] + xi * wr[size_t(m)];
                    m += f;
                    if (m >= n) m -= n;
                }
                out.re[size_t(base + stride * f)] = sre;
                out.im[size_t(base + stride * f)] = sim;
            }
        }
        c = std::move(out);
    }
    return c;
}

}  // namespace invtag::serial
