#include <doctest.h>

#include <cmath>

#include "invtag/conv.hpp"
#include "invtag/dft.hpp"
#include "invtag/interp.hpp"
#include "invtag/ivt_io.hpp"
#include "invtag/parallel.hpp"
#include "oracles.hpp"

using namespace invtag;

TEST_SUITE_BEGIN("field_core");

TEST_CASE("trilinear: constants, nodes, linear ramp") {
    GridSpec g{6, 5, 4};
    Volume c(g, 2.5f);
    CHECK(sample_trilinear_at(c, 1.3, 2.8, 0.4) == doctest::Approx(2.5).epsilon(1e-12));

    Volume v(g);
    Rng rng(7);
    for (auto& x : v.data) x = float(rng.uniform());
    CHECK(sample_trilinear_at(v, 3, 2, 1) == doctest::Approx(double(v.at(3, 2, 1))).epsilon(1e-12));

    Volume ramp(g);
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) ramp.at(i, j, k) = float(i);
    CHECK(sample_trilinear_at(ramp, 1.5, 0, 0) == doctest::Approx(1.5).epsilon(1e-12));
    // exactness on linear functions == agreement with the explicit corner sum
    CHECK(sample_trilinear_at(ramp, 2.25, 1.5, 2.75) ==
          doctest::Approx(oracle::trilinear_8corner(ramp, 2.25, 1.5, 2.75)).epsilon(1e-12));
}

TEST_CASE("trilinear matches 8-corner oracle on random points, clamped outside") {
    GridSpec g{5, 6, 7};
    Rng rng(11);
    Volume v = oracle::random_volume(g, rng);
    Rng prng(13);
    for (int t = 0; t < 200; ++t) {
        const double x = -2.0 + 9.0 * prng.uniform();
        const double y = -2.0 + 9.0 * prng.uniform();
        const double z = -2.0 + 9.0 * prng.uniform();
        CHECK(sample_trilinear_at(v, x, y, z) ==
              doctest::Approx(oracle::trilinear_8corner(v, x, y, z)).epsilon(1e-12));
    }
}

TEST_CASE("trilinear gradient: constants, ramps, FD oracle") {
    GridSpec g{4, 4, 4};
    Volume c(g, 1.0f);
    auto gc = sample_trilinear_grad_at(c, 1.2, 2.1, 0.7);
    CHECK(gc[0] == 0.0);
    CHECK(gc[1] == 0.0);
    CHECK(gc[2] == 0.0);

    Volume ramp(g);
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) ramp.at(i, j, k) = float(2 * i);
    auto gr = sample_trilinear_grad_at(ramp, 1.4, 2.0, 1.1);
    CHECK(gr[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(gr[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(gr[2] == doctest::Approx(0.0).epsilon(1e-12));

    Rng rng(3);
    Volume v = oracle::random_volume(g, rng);
    Rng prng(5);
    const double h = 1e-4;
    int tested = 0;
    while (tested < 100) {
        const double x = 0.2 + 2.6 * prng.uniform();
        const double y = 0.2 + 2.6 * prng.uniform();
        const double z = 0.2 + 2.6 * prng.uniform();
        // keep away from cell faces where the interpolant has kinks
        auto off = [](double q) { return std::fabs(q - std::round(q)); };
        if (off(x) < 1e-3 || off(y) < 1e-3 || off(z) < 1e-3) continue;
        ++tested;
        const auto gr2 = sample_trilinear_grad_at(v, x, y, z);
        const double fdx = (sample_trilinear_at(v, x + h, y, z) - sample_trilinear_at(v, x - h, y, z)) / (2 * h);
        const double fdy = (sample_trilinear_at(v, x, y + h, z) - sample_trilinear_at(v, x, y - h, z)) / (2 * h);
        const double fdz = (sample_trilinear_at(v, x, y, z + h) - sample_trilinear_at(v, x, y, z - h)) / (2 * h);
        CHECK(gr2[0] == doctest::Approx(fdx).epsilon(1e-5));
        CHECK(gr2[1] == doctest::Approx(fdy).epsilon(1e-5));
        CHECK(gr2[2] == doctest::Approx(fdz).epsilon(1e-5));
    }
}

TEST_CASE("batch sampling rejects non-finite points with index") {
    GridSpec g{4, 4, 4};
    Volume v(g, 1.0f);
    std::vector<std::array<double, 3>> pts = {{1, 1, 1}, {std::nan(""), 0, 0}};
    CHECK_THROWS_WITH_AS(sample_trilinear(v, pts), doctest::Contains("index 1"), Error);
}

TEST_CASE("conv: sigma zero is identity, constants preserved") {
    GridSpec g{7, 6, 5};
    Rng rng(21);
    Volume v = oracle::random_volume(g, rng);
    Volume out = conv_gaussian(v, 0, 0, 0);
    for (std::int64_t i = 0; i < v.size(); ++i) CHECK(out.data[size_t(i)] == v.data[size_t(i)]);

    Volume c(g, 0.73f);
    Volume cb = conv_gaussian(c, 1.5, 0.8, 2.0);
    for (float x : cb.data) CHECK(x == doctest::Approx(0.73).epsilon(1e-6));
}

TEST_CASE("conv: delta response and dense-convolution oracle") {
    GridSpec g{17, 17, 17};
    Volume delta(g);
    delta.at(8, 8, 8) = 1.0f;
    Volume out = conv_gaussian(delta, 1, 1, 1);

    // center tap of the normalized kernel, cubed for the three axes
    double s = 0.0;
    for (int u = -4; u <= 4; ++u) s += std::exp(-0.5 * u * u);
    CHECK(double(out.at(8, 8, 8)) == doctest::Approx(1.0 / (s * s * s)).epsilon(1e-6));

    const Volume dense = oracle::dense_gaussian_conv(delta, 1, 1, 1);
    for (std::int64_t i = 0; i < out.size(); ++i)
        CHECK(double(out.data[size_t(i)]) ==
              doctest::Approx(double(dense.data[size_t(i)])).epsilon(1e-6));
}

TEST_CASE("conv: random volume matches dense oracle, anisotropic + boundary") {
    GridSpec g{9, 8, 7};
    Rng rng(31);
    Volume v = oracle::random_volume(g, rng);
    Volume out = conv_gaussian(v, 1.3, 0.0, 2.2);
    const Volume dense = oracle::dense_gaussian_conv(v, 1.3, 0.0, 2.2);
    for (std::int64_t i = 0; i < out.size(); ++i)
        CHECK(double(out.data[size_t(i)]) ==
              doctest::Approx(double(dense.data[size_t(i)])).epsilon(1e-6));
}

TEST_CASE("conv: kernel normalization and negative sigma") {
    auto w = gaussian_kernel(2.7);
    double s = 0.0;
    for (double x : w) s += x;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(int(w.size()) == 2 * int(std::ceil(4 * 2.7)) + 1);
    CHECK_THROWS_AS(conv_gaussian(Volume(GridSpec{4, 4, 4}), -1.0, 0, 0), Error);
}

TEST_CASE("conv results do not depend on the thread count") {
    GridSpec g{16, 12, 10};
    Rng rng(41);
    Volume v = oracle::random_volume(g, rng);
    set_thread_count(1);
    Volume a = conv_gaussian(v, 1.1, 2.0, 0.7);
    set_thread_count(2);
    Volume b = conv_gaussian(v, 1.1, 2.0, 0.7);
    set_thread_count(0);
    for (std::int64_t i = 0; i < a.size(); ++i) CHECK(a.data[size_t(i)] == b.data[size_t(i)]);
}

TEST_CASE("dft: constant volume concentrates in the DC bin") {
    GridSpec g{6, 5, 4};
    Volume c(g, 1.25f);
    ComplexVolume f = dft3_forward(c);
    CHECK(f.re[0] == doctest::Approx(1.25 * g.count()).epsilon(1e-12));
    CHECK(std::fabs(f.im[0]) < 1e-9);
    for (std::int64_t i = 1; i < f.size(); ++i) {
        CHECK(std::fabs(f.re[size_t(i)]) < 1e-9);
        CHECK(std::fabs(f.im[size_t(i)]) < 1e-9);
    }
}

TEST_CASE("dft: integer-frequency cosine lands in exactly two bins") {
    GridSpec g{16, 4, 4};
    Volume v(g);
    const int kf = 3;
    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i)
                v.at(i, j, k) = float(std::cos(2.0 * M_PI * kf * i / g.nx));
    ComplexVolume f = dft3_forward(v);
    const double expect = 0.5 * double(g.count());
    for (int i = 0; i < g.nx; ++i) {
        const double mag = std::hypot(f.re[size_t(g.index(i, 0, 0))], f.im[size_t(g.index(i, 0, 0))]);
        if (i == kf || i == g.nx - kf)
            CHECK(mag == doctest::Approx(expect).epsilon(1e-7));
        else
            CHECK(mag < 1e-5);  // f32 input quantization leaks ~N*eps32
    }
}

TEST_CASE("dft: random 8^3 against the naive O(N^2) oracle; round trip; Parseval") {
    GridSpec g{8, 8, 8};
    Rng rng(55);
    Volume v = oracle::random_volume(g, rng, -1.0, 1.0);
    ComplexVolume f = dft3_forward(v);
    const auto ref = oracle::naive_dft3(v);
    double num = 0.0, den = 0.0;
    for (std::int64_t i = 0; i < f.size(); ++i) {
        num += std::norm(std::complex<double>(f.re[size_t(i)], f.im[size_t(i)]) - ref[size_t(i)]);
        den += std::norm(ref[size_t(i)]);
    }
    CHECK(std::sqrt(num / den) < 1e-8);

    Volume back = dft3_inverse(f);
    double dnum = 0.0, dden = 0.0;
    for (std::int64_t i = 0; i < v.size(); ++i) {
        const double d = double(back.data[size_t(i)]) - double(v.data[size_t(i)]);
        dnum += d * d;
        dden += double(v.data[size_t(i)]) * double(v.data[size_t(i)]);
    }
    CHECK(std::sqrt(dnum / dden) < 1e-6);

    double space = 0.0, freqp = 0.0;
    for (std::int64_t i = 0; i < v.size(); ++i)
        space += double(v.data[size_t(i)]) * double(v.data[size_t(i)]);
    for (std::int64_t i = 0; i < f.size(); ++i)
        freqp += f.re[size_t(i)] * f.re[size_t(i)] + f.im[size_t(i)] * f.im[size_t(i)];
    CHECK(freqp / double(g.count()) == doctest::Approx(space).epsilon(1e-6));
}

TEST_CASE("ivt: volume, field and stack round-trip losslessly") {
    GridSpec g{5, 4, 6};
    Rng rng(77);
    Volume v = oracle::random_volume(g, rng, -2.0, 2.0);
    const std::string dir = "ivt_io_test";
    write_ivt(dir + ".vol.ivt", v);
    Volume v2 = read_ivt_volume(dir + ".vol.ivt");
    REQUIRE(v2.grid == g);
    for (std::int64_t i = 0; i < v.size(); ++i) CHECK(v.data[size_t(i)] == v2.data[size_t(i)]);

    VectorField fld(g);
    for (auto& c : fld.comp)
        for (auto& x : c) x = float(rng.uniform());
    write_ivt(dir + ".fld.ivt", fld);
    VectorField f2 = read_ivt_field(dir + ".fld.ivt");
    for (int c = 0; c < 3; ++c)
        for (std::int64_t i = 0; i < g.count(); ++i)
            CHECK(fld.comp[size_t(c)][size_t(i)] == f2.comp[size_t(c)][size_t(i)]);

    std::vector<Volume> stack = {v, v2};
    write_ivt_stack(dir + ".stk.ivt", stack);
    auto s2 = read_ivt_stack(dir + ".stk.ivt");
    REQUIRE(s2.size() == 2);
    for (std::int64_t i = 0; i < v.size(); ++i) CHECK(s2[1].data[size_t(i)] == v.data[size_t(i)]);

    std::remove((dir + ".vol.ivt").c_str());
    std::remove((dir + ".fld.ivt").c_str());
    std::remove((dir + ".stk.ivt").c_str());
}

TEST_CASE("grid validation enforces dims and voxel cap") {
    CHECK_THROWS_AS((GridSpec{2, 8, 8}.validate()), Error);
    CHECK_NOTHROW((GridSpec{4, 4, 4}.validate()));
}

TEST_SUITE_END();
