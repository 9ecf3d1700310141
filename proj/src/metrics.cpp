#include "invtag/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "invtag/conv.hpp"
#include "invtag/dft.hpp"
#include "invtag/error.hpp"
#include "invtag/parallel.hpp"

namespace invtag {

namespace {

std::pair<double, double> shared_range(const Volume& x, const Volume& y) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (float v : x.data) {
        lo = std::min(lo, double(v));
        hi = std::max(hi, double(v));
    }
    for (float v : y.data) {
        lo = std::min(lo, double(v));
        hi = std::max(hi, double(v));
    }
    return {lo, hi};
}

// Separable filter with explicit taps, replicate boundary, double accumulate.
Volume filter_axis(const Volume& in, int axis, std::span<const double> w) {
    const GridSpec g = in.grid;
    const int radius = int(w.size() / 2);
    const int n = axis == 0 ? g.nx : (axis == 1 ? g.ny : g.nz);
    const std::int64_t stride = axis == 0 ? 1 : (axis == 1 ? g.nx : std::int64_t(g.nx) * g.ny);
    Volume out(g);
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
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int u = -radius; u <= radius; ++u) {
                int q = i - u;
                q = q < 0 ? 0 : (q >= n ? n - 1 : q);
                acc += w[size_t(u + radius)] * double(in.data[size_t(base + stride * q)]);
            }
            out.data[size_t(base + stride * i)] = float(acc);
        }
    });
    return out;
}

std::vector<double> ssim_window() {
    // 7-tap Gaussian, sigma 1.5, unit sum
    std::vector<double> w(7);
    double sum = 0.0;
    for (int u = -3; u <= 3; ++u) {
        w[size_t(u + 3)] = std::exp(-0.5 * u * u / (1.5 * 1.5));
        sum += w[size_t(u + 3)];
    }
    for (auto& v : w) v /= sum;
    return w;
}

Volume window_mean(const Volume& v, std::span<const double> w) {
    return filter_axis(filter_axis(filter_axis(v, 0, w), 1, w), 2, w);
}

}  // namespace

double psnr(const Volume& x, const Volume& y) {
    check(x.grid == y.grid, "psnr: grid mismatch");
    const auto [lo, hi] = shared_range(x, y);
    const double range = hi - lo;
    if (range == 0.0) return std::numeric_limits<double>::infinity();
    const double mse = block_sum(x.size(), [&](std::int64_t i) {
                           const double d =
                               (double(x.data[size_t(i)]) - double(y.data[size_t(i)])) / range;
                           return d * d;
                       }) /
                       double(x.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Volume& x, const Volume& y) {
    check(x.grid == y.grid, "ssim: grid mismatch");
    const auto [lo, hi] = shared_range(x, y);
    const double range = hi > lo ? hi - lo : 1.0;
    Volume xn(x.grid), yn(x.grid), xx(x.grid), yy(x.grid), xy(x.grid);
    parallel_for(x.size(), [&](std::int64_t i) {
        const double a = (double(x.data[size_t(i)]) - lo) / range;
        const double b = (double(y.data[size_t(i)]) - lo) / range;
        xn.data[size_t(i)] = float(a);
        yn.data[size_t(i)] = float(b);
        xx.data[size_t(i)] = float(a * a);
        yy.data[size_t(i)] = float(b * b);
        xy.data[size_t(i)] = float(a * b);
    });
    const auto w = ssim_window();
    const Volume mx = window_mean(xn, w);
    const Volume my = window_mean(yn, w);
    const Volume mxx = window_mean(xx, w);
    const Volume myy = window_mean(yy, w);
    const Volume mxy = window_mean(xy, w);

    const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;  // L = 1 after normalization
    const double total = block_sum(x.size(), [&](std::int64_t i) {
        const double ux = mx.data[size_t(i)], uy = my.data[size_t(i)];
        const double vx = double(mxx.data[size_t(i)]) - ux * ux;
        const double vy = double(myy.data[size_t(i)]) - uy * uy;
        const double cxy = double(mxy.data[size_t(i)]) - ux * uy;
        return ((2 * ux * uy + C1) * (2 * cxy + C2)) /
               ((ux * ux + uy * uy + C1) * (vx + vy + C2));
    });
    return total / double(x.size());
}

std::pair<double, double> epe(const VectorField& u_est, const VectorField& u_gt, const Volume& fg,
                              double fg_threshold) {
    check(u_est.grid == u_gt.grid && fg.grid == u_est.grid, "epe: grid mismatch");
    std::vector<double> err;
    err.reserve(size_t(u_est.size()));
    for (std::int64_t i = 0; i < u_est.size(); ++i) {
        if (double(fg.data[size_t(i)]) <= fg_threshold) continue;
        double s = 0.0;
        for (int c = 0; c < 3; ++c) {
            const double d =
                double(u_est.comp[size_t(c)][size_t(i)]) - double(u_gt.comp[size_t(c)][size_t(i)]);
            s += d * d;
        }
        err.push_back(std::sqrt(s));
    }
    if (err.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double e : err) mean += e;
    mean /= double(err.size());
    std::sort(err.begin(), err.end());
    const size_t rank = size_t(std::ceil(0.95 * double(err.size())));  // nearest-rank
    return {mean, err[std::min(rank == 0 ? 0 : rank - 1, err.size() - 1)]};
}

double negdet_pct(const DeformField& d) {
    const Volume det = jacobian_det(d);
    const GridSpec g = det.grid;
    std::int64_t neg = 0, total = 0;
    for (int k = 1; k < g.nz - 1; ++k)
        for (int j = 1; j < g.ny - 1; ++j)
            for (int i = 1; i < g.nx - 1; ++i) {
                ++total;
                if (det.at(i, j, k) < 0.0f) ++neg;
            }
    return total > 0 ? 100.0 * double(neg) / double(total) : 0.0;
}

Volume lowpass_fuse(std::span<const Volume> g3, double sigma_c) {
    check(g3.size() == 3, "lowpass_fuse: need three orientations");
    check(sigma_c >= 0.0, "lowpass_fuse: sigma must be >= 0");
    const GridSpec g = g3[0].grid;
    Volume acc(g);
    for (int o = 0; o < 3; ++o) {
        check(g3[size_t(o)].grid == g, "lowpass_fuse: grid mismatch");
        const Volume f = conv_gaussian_axis(g3[size_t(o)], o, sigma_c);
        parallel_for(g.count(), [&](std::int64_t i) {
            acc.data[size_t(i)] += float(double(f.data[size_t(i)]) / 3.0);
        });
    }
    return acc;
}

Volume harp_demodulate(std::span<const Volume> g3, double tag_spacing) {
    check(g3.size() == 3, "harp_demodulate: need three orientations");
    check(tag_spacing > 0.0, "harp_demodulate: tag frequency must be positive");
    const GridSpec g = g3[0].grid;
    const double f0 = 1.0 / tag_spacing;  // cycles per voxel
    const double radius = 0.5 * f0;

    auto freq = [](int bin, int size) {
        const int s = bin <= size / 2 ? bin : bin - size;
        return double(s) / double(size);
    };

    Volume acc(g);
    for (int o = 0; o < 3; ++o) {
        check(g3[size_t(o)].grid == g, "harp_demodulate: grid mismatch");
        ComplexVolume spec = dft3_forward(g3[size_t(o)]);
        parallel_for(g.count(), [&](std::int64_t idx) {
            const int i = int(idx % g.nx);
            const int j = int((idx / g.nx) % g.ny);
            const int k = int(idx / (std::int64_t(g.nx) * g.ny));
            const double fx = freq(i, g.nx), fy = freq(j, g.ny), fz = freq(k, g.nz);
            const double cx = o == 0 ? f0 : 0.0;
            const double cy = o == 1 ? f0 : 0.0;
            const double cz = o == 2 ? f0 : 0.0;
            const double d2 = (fx - cx) * (fx - cx) + (fy - cy) * (fy - cy) + (fz - cz) * (fz - cz);
            if (d2 > radius * radius) {
                spec.re[size_t(idx)] = 0.0;
                spec.im[size_t(idx)] = 0.0;
            }
        });
        const ComplexVolume img = dft3_inverse_c(spec);
        parallel_for(g.count(), [&](std::int64_t idx) {
            const double mag = std::hypot(img.re[size_t(idx)], img.im[size_t(idx)]);
            acc.data[size_t(idx)] += float(2.0 * mag / 3.0);
        });
    }
    return acc;
}

}  // namespace invtag
