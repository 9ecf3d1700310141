#include "invtag/dft.hpp"

#include <cmath>
#include <vector>

#include "invtag/parallel.hpp"

namespace invtag {

namespace {

// Twiddle table W[m] = exp(sign * 2*pi*i * m / n) for m in [0, n).
struct Twiddles {
    std::vector<double> re, im;
    explicit Twiddles(int n, double sign) : re(size_t(n)), im(size_t(n)) {
        for (int m = 0; m < n; ++m) {
            const double ang = sign * 2.0 * M_PI * double(m) / double(n);
            re[size_t(m)] = std::cos(ang);
            im[size_t(m)] = std::sin(ang);
        }
    }
};

// In-place-style transform along one axis: out[f] = sum_r in[r] * W[(f*r) % n].
void transform_axis(ComplexVolume& v, int axis, double sign) {
    const GridSpec g = v.grid;
    const int n = axis == 0 ? g.nx : (axis == 1 ? g.ny : g.nz);
    const std::int64_t stride = axis == 0 ? 1 : (axis == 1 ? g.nx : std::int64_t(g.nx) * g.ny);
    const Twiddles tw(n, sign);

    ComplexVolume out(g);
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
        for (int f = 0; f < n; ++f) {
            double sre = 0.0, sim = 0.0;
            std::int64_t m = 0;  // (f*r) mod n without the multiply
            for (int r = 0; r < n; ++r) {
                const double xr = v.re[size_t(base + stride * r)];
                const double xi = v.im[size_t(base + stride * r)];
                const double wr = tw.re[size_t(m)], wi = tw.im[size_t(m)];
                sre += xr * wr - xi * wi;
                sim += xr * wi + xi * wr;
                m += f;
                if (m >= n) m -= n;
            }
            out.re[size_t(base + stride * f)] = sre;
            out.im[size_t(base + stride * f)] = sim;
        }
    });
    v = std::move(out);
}

void transform3(ComplexVolume& v, double sign) {
    transform_axis(v, 0, sign);
    transform_axis(v, 1, sign);
    transform_axis(v, 2, sign);
}

}  // namespace

ComplexVolume dft3_forward(const Volume& v) {
    ComplexVolume c(v.grid);
    const std::int64_t n = v.size();
    parallel_for(n, [&](std::int64_t i) { c.re[size_t(i)] = double(v.data[size_t(i)]); });
    transform3(c, -1.0);
    return c;
}

ComplexVolume dft3_forward(const ComplexVolume& v) {
    ComplexVolume c = v;
    transform3(c, -1.0);
    return c;
}

ComplexVolume dft3_inverse_c(const ComplexVolume& c) {
    ComplexVolume out = c;
    transform3(out, 1.0);
    const double scale = 1.0 / double(c.size());
    const std::int64_t n = c.size();
    parallel_for(n, [&](std::int64_t i) {
        out.re[size_t(i)] *= scale;
        out.im[size_t(i)] *= scale;
    });
    return out;
}

Volume dft3_inverse(const ComplexVolume& c, double* max_imag) {
    ComplexVolume inv = dft3_inverse_c(c);
    Volume v(c.grid);
    const std::int64_t n = c.size();
    parallel_for(n, [&](std::int64_t i) { v.data[size_t(i)] = float(inv.re[size_t(i)]); });
    if (max_imag) {
        double m = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            const double a = std::fabs(inv.im[size_t(i)]);
            if (a > m) m = a;
        }
        *max_imag = m;
    }
    return v;
}

}  // namespace invtag
