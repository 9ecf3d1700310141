#include <doctest.h>

#include <cmath>

#include "invtag/forward_model.hpp"
#include "invtag/metrics.hpp"
#include "oracles.hpp"

using namespace invtag;

namespace {

// Straight SSIM reimplementation: explicit 7^3 window loops in double.
double ssim_reference(const Volume& x, const Volume& y) {
    const GridSpec g = x.grid;
    double lo = 1e300, hi = -1e300;
    for (float v : x.data) {
        lo = std::min(lo, double(v));
        hi = std::max(hi, double(v));
    }
    for (float v : y.data) {
        lo = std::min(lo, double(v));
        hi = std::max(hi, double(v));
    }
    const double range = hi > lo ? hi - lo : 1.0;

    double w1[7];
    double wsum = 0.0;
    for (int u = -3; u <= 3; ++u) {
        w1[u + 3] = std::exp(-0.5 * u * u / 2.25);
        wsum += w1[u + 3];
    }
    for (double& v : w1) v /= wsum;
    auto cl = [](int q, int n) { return q < 0 ? 0 : (q >= n ? n - 1 : q); };

    const double C1 = 1e-4, C2 = 9e-4;
    double total = 0.0;
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
                for (int c = -3; c <= 3; ++c)
                    for (int b = -3; b <= 3; ++b)
                        for (int a = -3; a <= 3; ++a) {
                            const double w = w1[a + 3] * w1[b + 3] * w1[c + 3];
                            const double xv =
                                (double(x.at(cl(i + a, g.nx), cl(j + b, g.ny), cl(k + c, g.nz))) - lo) / range;
                            const double yv =
                                (double(y.at(cl(i + a, g.nx), cl(j + b, g.ny), cl(k + c, g.nz))) - lo) / range;
                            mx += w * xv;
                            my += w * yv;
                            mxx += w * xv * xv;
                            myy += w * yv * yv;
                            mxy += w * xv * yv;
                        }
                const double vx = mxx - mx * mx, vy = myy - my * my, cxy = mxy - mx * my;
                total += ((2 * mx * my + C1) * (2 * cxy + C2)) /
                         ((mx * mx + my * my + C1) * (vx + vy + C2));
            }
    return total / double(g.count());
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("psnr: identity is +inf; a 0.1 offset at unit range is 20 dB") {
    GridSpec g{8, 8, 8};
    Rng rng(3);
    // values span exactly [0, 0.9]; with the offset the shared range has width 1
    Volume x(g);
    for (std::int64_t i = 0; i < g.count(); ++i)
        x.data[size_t(i)] = float(0.9 * rng.uniform());
    x.data[0] = 0.0f;
    x.data[1] = 0.9f;
    CHECK(std::isinf(psnr(x, x)));
    CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-9));

    Volume y = x;
    for (auto& v : y.data) v += 0.1f;
    CHECK(psnr(x, y) == doctest::Approx(20.0).epsilon(1e-4));
    CHECK(psnr(x, y) == doctest::Approx(psnr(y, x)).epsilon(1e-12));
}

TEST_CASE("ssim matches the reference formula on random volumes") {
    GridSpec g{16, 16, 16};
    Rng rng(5);
    Volume x = oracle::random_volume(g, rng);
    Volume y = oracle::random_volume(g, rng.sub(1));
    // mix in structure so the score is not pure noise
    for (std::int64_t i = 0; i < g.count(); ++i)
        y.data[size_t(i)] = float(0.6 * double(x.data[size_t(i)]) + 0.4 * double(y.data[size_t(i)]));
    CHECK(ssim(x, y) == doctest::Approx(ssim_reference(x, y)).epsilon(1e-6));
    CHECK(ssim(x, y) == doctest::Approx(ssim(y, x)).epsilon(1e-12));
}

TEST_CASE("epe: zero for identical fields; 3-4-5 offset; loop oracle") {
    GridSpec g{8, 8, 8};
    Volume fg(g, 1.0f);
    VectorField u(g);
    Rng rng(9);
    for (auto& c : u.comp)
        for (auto& v : c) v = float(2.0 * rng.uniform() - 1.0);

    auto [m0, p0] = epe(u, u, fg);
    CHECK(m0 == 0.0);
    CHECK(p0 == 0.0);

    VectorField shifted = u;
    for (std::int64_t i = 0; i < g.count(); ++i) {
        shifted.comp[0][size_t(i)] += 0.3f;
        shifted.comp[2][size_t(i)] += 0.4f;
    }
    auto [m1, p1] = epe(shifted, u, fg);
    CHECK(m1 == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(p1 == doctest::Approx(0.5).epsilon(1e-6));

    VectorField w(g);
    for (auto& c : w.comp)
        for (auto& v : c) v = float(2.0 * rng.uniform() - 1.0);
    auto [m2, p2] = epe(u, w, fg);
    std::vector<double> ref;
    for (std::int64_t i = 0; i < g.count(); ++i) {
        double s = 0;
        for (int c = 0; c < 3; ++c) {
            const double d = double(u.comp[size_t(c)][size_t(i)]) - double(w.comp[size_t(c)][size_t(i)]);
            s += d * d;
        }
        ref.push_back(std::sqrt(s));
    }
    double mean = 0;
    for (double e : ref) mean += e;
    mean /= double(ref.size());
    std::sort(ref.begin(), ref.end());
    const double p95 = ref[size_t(std::ceil(0.95 * double(ref.size()))) - 1];
    CHECK(m2 == doctest::Approx(mean).epsilon(1e-10));
    CHECK(p2 == doctest::Approx(p95).epsilon(1e-10));
}

TEST_CASE("epe respects the foreground mask") {
    GridSpec g{6, 6, 6};
    Volume fg(g, 0.0f);
    fg.at(3, 3, 3) = 1.0f;
    VectorField u(g), w(g);
    for (std::int64_t i = 0; i < g.count(); ++i) u.comp[0][size_t(i)] = 7.0f;  // huge everywhere
    u.at(0, 3, 3, 3) = 1.0f;  // but only this voxel is foreground
    auto [m, p] = epe(u, w, fg);
    CHECK(m == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(p == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("negdet: identity 0, point reflection 100, interior only") {
    GridSpec g{8, 8, 8};
    CHECK(negdet_pct(DeformField{VectorField::identity_map(g), 0}) == 0.0);

    VectorField refl(g);
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                refl.at(0, i, j, k) = float(7.0 - i);
                refl.at(1, i, j, k) = float(7.0 - j);
                refl.at(2, i, j, k) = float(7.0 - k);
            }
    CHECK(negdet_pct(DeformField{refl, 0}) == doctest::Approx(100.0));
}

TEST_CASE("lowpass_fuse: constants pass through; analytic tag attenuation") {
    GridSpec g{40, 12, 12};
    std::vector<Volume> flat(3, Volume(g, 0.42f));
    Volume fused = lowpass_fuse(flat, 3.0);
    for (float v : fused.data) CHECK(v == doctest::Approx(0.42).epsilon(1e-6));

    // cosine tag along x at spacing 10, filtered at sigma = spacing / 2
    const double lambda = 10.0, alpha1 = 0.8, sigma_c = lambda / 2.0;
    std::vector<Volume> g3(3, Volume(g, 0.5f));
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                g3[0].at(i, j, k) = float(0.5 + alpha1 * std::cos(2 * M_PI * i / lambda));
    Volume out = lowpass_fuse(g3, sigma_c);
    // ripple amplitude after the three-way average: alpha1/3 * |H(1/lambda)|
    const double atten = std::exp(-0.5 * std::pow(2 * M_PI * sigma_c / lambda, 2));
    double ripple = 0.0;
    for (int i = 10; i < 30; ++i)
        ripple = std::max(ripple, std::fabs(double(out.at(i, 6, 6)) - 0.5));
    CHECK(ripple == doctest::Approx(alpha1 / 3.0 * atten).epsilon(0.05));

    // sigma -> 0: plain average of the inputs
    Volume avg = lowpass_fuse(g3, 0.0);
    for (int i = 0; i < g.nx; ++i)
        CHECK(double(avg.at(i, 6, 6)) ==
              doctest::Approx((double(g3[0].at(i, 6, 6)) + 1.0) / 3.0).epsilon(1e-6));
}

TEST_CASE("harp_demodulate: recovers the modulating envelope of a pure tag") {
    GridSpec g{40, 16, 16};
    const double lambda = 8.0, c = 0.6;
    std::vector<Volume> g3(3, Volume(g, 0.0f));
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                g3[0].at(i, j, k) = float(c * std::cos(2 * M_PI * i / lambda));
                g3[1].at(i, j, k) = float(c * std::cos(2 * M_PI * j / lambda));
                g3[2].at(i, j, k) = float(c * std::cos(2 * M_PI * k / lambda));
            }
    Volume out = harp_demodulate(g3, lambda);
    // each orientation contributes c after sideband scaling; interior voxels
    for (int i = 4; i < g.nx - 4; ++i)
        CHECK(double(out.at(i, 8, 8)) == doctest::Approx(c).epsilon(0.05));

    // no energy near the passband -> ~0
    std::vector<Volume> dc(3, Volume(g, 0.3f));
    Volume quiet = harp_demodulate(dc, lambda);
    for (float v : quiet.data) CHECK(std::fabs(double(v)) <= 1e-4);

    CHECK_THROWS_AS(harp_demodulate(g3, -1.0), Error);
}

TEST_CASE("baselines commute with global intensity scaling") {
    GridSpec g{16, 16, 16};
    Rng rng(17);
    std::vector<Volume> g3;
    for (int o = 0; o < 3; ++o) g3.push_back(oracle::random_volume(g, rng.sub(unsigned(o))));
    std::vector<Volume> scaled = g3;
    for (auto& v : scaled)
        for (auto& x : v.data) x *= 2.5f;

    Volume a = lowpass_fuse(g3, 2.0);
    Volume b = lowpass_fuse(scaled, 2.0);
    for (std::int64_t i = 0; i < g.count(); ++i)
        CHECK(double(b.data[size_t(i)]) == doctest::Approx(2.5 * double(a.data[size_t(i)])).epsilon(1e-5));

    Volume ha = harp_demodulate(g3, 8.0);
    Volume hb = harp_demodulate(scaled, 8.0);
    for (std::int64_t i = 0; i < g.count(); ++i)
        CHECK(double(hb.data[size_t(i)]) ==
              doctest::Approx(2.5 * double(ha.data[size_t(i)])).epsilon(1e-5).scale(1e-4));
}

TEST_SUITE_END();
