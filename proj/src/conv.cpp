#include "invtag/conv.hpp"

#include <cmath>

#include "invtag/error.hpp"
#include "invtag/parallel.hpp"

namespace invtag {

std::vector<double> gaussian_kernel(double sigma) {
    check(sigma >= 0.0, "gaussian sigma must be >= 0, got %g", sigma);
    if (sigma == 0.0) return {1.0};
    const int radius = int(std::ceil(4.0 * sigma));
    std::vector<double> w(size_t(2 * radius + 1));
    double sum = 0.0;
    for (int u = -radius; u <= radius; ++u) {
        double val = std::exp(-0.5 * double(u) * double(u) / (sigma * sigma));
        w[size_t(u + radius)] = val;
        sum += val;
    }
    for (auto& v : w) v /= sum;
    return w;
}

namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// y[i] = sum_u w[u] x[clamp(i-u)] along `axis`.
Volume conv_axis_fwd(const Volume& in, int axis, const std::vector<double>& w) {
    const GridSpec g = in.grid;
    const int radius = int(w.size() / 2);
    const int n = axis == 0 ? g.nx : (axis == 1 ? g.ny : g.nz);
    const std::int64_t stride = axis == 0 ? 1 : (axis == 1 ? g.nx : std::int64_t(g.nx) * g.ny);
    Volume out(g);

    // Lines orthogonal to `axis`, indexed so each thread owns whole lines.
    const std::int64_t nlines = g.count() / n;
    parallel_for(nlines, [&](std::int64_t line) {
        // Decompose the line index into the two non-axis coordinates.
        std::int64_t base;
        if (axis == 0) {
            base = line * g.nx;  // (j,k) plane, x contiguous
        } else if (axis == 1) {
            const std::int64_t k = line / g.nx, i = line % g.nx;
            base = g.index(int(i), 0, int(k));
        } else {
            base = line;  // (i,j) flattened, z strided
        }
        const float* x = in.data.data();
        float* y = out.data.data();
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int u = -radius; u <= radius; ++u)
                acc += w[size_t(u + radius)] * x[base + stride * clampi(i - u, 0, n - 1)];
            y[base + stride * i] = float(acc);
        }
    });
    return out;
}

// Exact transpose of conv_axis_fwd: interior outputs are the zero-padded
// correlation; the clamp folds out-of-range mass onto the two end samples.
Volume conv_axis_adj(const Volume& in, int axis, const std::vector<double>& w) {
    const GridSpec g = in.grid;
    const int radius = int(w.size() / 2);
    const int n = axis == 0 ? g.nx : (axis == 1 ? g.ny : g.nz);
    const std::int64_t stride = axis == 0 ? 1 : (axis == 1 ? g.nx : std::int64_t(g.nx) * g.ny);
    Volume out(g);

    // Tail sums of the kernel for the folded edge contributions.
    // w_ge[d] = sum_{u >= d} w[u], w_le[d] = sum_{u <= d} w[u], d in [-R, R].
    std::vector<double> w_ge(w.size()), w_le(w.size());
    {
        double s = 0.0;
        for (int d = radius; d >= -radius; --d) {
            s += w[size_t(d + radius)];
            w_ge[size_t(d + radius)] = s;
        }
        s = 0.0;
        for (int d = -radius; d <= radius; ++d) {
            s += w[size_t(d + radius)];
            w_le[size_t(d + radius)] = s;
        }
    }

    const std::int64_t nlines = g.count() / n;
    parallel_for(nlines, [&](std::int64_t line) {
        std::int64_t base;
        if (axis == 0) {
            base = line * g.nx;
        } else if (axis == 1) {
            const std::int64_t k = line / g.nx, i = line % g.nx;
            base = g.index(int(i), 0, int(k));
        } else {
            base = line;
        }
        const float* y = in.data.data();
        float* z = out.data.data();
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            if (j > 0 && j < n - 1) {
                for (int u = -radius; u <= radius; ++u) {
                    const int i = j + u;
                    if (i >= 0 && i < n) acc += w[size_t(u + radius)] * y[base + stride * i];
                }
            } else if (j == 0) {
                // all (i, u) with i - u <= 0
                const int imax = radius < n - 1 ? radius : n - 1;
                for (int i = 0; i <= imax; ++i) acc += w_ge[size_t(i + radius)] * y[base + stride * i];
            } else {  // j == n - 1
                const int imin = n - 1 - radius > 0 ? n - 1 - radius : 0;
                for (int i = imin; i < n; ++i)
                    acc += w_le[size_t(i - (n - 1) + radius)] * y[base + stride * i];
            }
            z[base + stride * j] = float(acc);
        }
    });
    return out;
}

}  // namespace

Volume conv_gaussian_axis(const Volume& v, int axis, double sigma) {
    if (sigma == 0.0) return v;
    return conv_axis_fwd(v, axis, gaussian_kernel(sigma));
}

Volume conv_gaussian(const Volume& v, double sx, double sy, double sz) {
    Volume out = conv_gaussian_axis(v, 0, sx);
    out = conv_gaussian_axis(out, 1, sy);
    out = conv_gaussian_axis(out, 2, sz);
    return out;
}

Volume conv_gaussian_adjoint(const Volume& v, double sx, double sy, double sz) {
    // Adjoint of (Cz . Cy . Cx) is (CxT . CyT . CzT).
    Volume out = v;
    if (sz != 0.0) out = conv_axis_adj(out, 2, gaussian_kernel(sz));
    if (sy != 0.0) out = conv_axis_adj(out, 1, gaussian_kernel(sy));
    if (sx != 0.0) out = conv_axis_adj(out, 0, gaussian_kernel(sx));
    return out;
}

}  // namespace invtag
