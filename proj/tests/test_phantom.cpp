#include <doctest.h>

#include <cmath>

#include "invtag/dft.hpp"
#include "invtag/metrics.hpp"
#include "invtag/phantom.hpp"
#include "oracles.hpp"

using namespace invtag;

TEST_SUITE_BEGIN("phantom");

TEST_CASE("render_phantom: sphere interior/exterior, disjoint additivity, formula oracle") {
    GridSpec g{24, 24, 24};
    PhantomSpec spec;
    spec.grid = g;
    Ellipsoid s;
    s.center = {11.5, 11.5, 11.5};
    s.semi_axes = {5, 5, 5};
    s.euler_zyx = {0, 0, 0};
    s.intensity = 0.8;
    s.edge_softness = 0.0;  // hard edge
    spec.ellipsoids.push_back(s);
    Volume v = render_phantom(spec);
    CHECK(double(v.at(11, 11, 11)) == doctest::Approx(0.8).epsilon(1e-6));
    CHECK(double(v.at(22, 11, 11)) == doctest::Approx(0.0).epsilon(1e-9));  // ~2r away

    // two disjoint ellipsoids add without interaction outside their overlap
    PhantomSpec two = spec;
    Ellipsoid other = s;
    other.center = {4, 4, 4};
    other.semi_axes = {2.5, 2, 2};
    other.intensity = 0.15;
    two.ellipsoids.push_back(other);
    Volume v2 = render_phantom(two);
    CHECK(double(v2.at(11, 11, 11)) == doctest::Approx(0.8).epsilon(1e-6));
    CHECK(double(v2.at(4, 4, 4)) == doctest::Approx(0.15).epsilon(1e-6));

    // full-volume direct evaluation oracle (soft edges, rotations)
    PhantomSpec soft = make_phantom_spec(g, 3, Rng(5));
    Volume r = render_phantom(soft);
    for (auto [i, j, k] :
         {std::array<int, 3>{0, 0, 0}, {5, 11, 17}, {12, 12, 12}, {23, 1, 9}, {7, 20, 3}}) {
        double acc = soft.background;
        for (const auto& e : soft.ellipsoids)
            acc += e.intensity /
                   (1.0 + std::exp(ellipsoid_signed_distance(e, i, j, k) / e.edge_softness));
        acc = std::clamp(acc, 0.0, 1.0);
        CHECK(double(r.at(i, j, k)) == doctest::Approx(acc).epsilon(1e-6));
    }
}

TEST_CASE("divergence-free velocity: discrete div of the discrete curl vanishes") {
    GridSpec g{20, 18, 16};
    MotionSpec spec;
    spec.seed = 11;
    spec.amplitude = 2.0;
    spec.smoothness = 5.0;
    VectorField v = make_divergence_free_velocity(spec, g);

    double vmax = 0.0;
    for (const auto& c : v.comp)
        for (float x : c) vmax = std::max(vmax, double(std::fabs(x)));
    REQUIRE(vmax > 0.0);

    double dmax = 0.0;
    for (int k = 1; k < g.nz - 1; ++k)
        for (int j = 1; j < g.ny - 1; ++j)
            for (int i = 1; i < g.nx - 1; ++i) {
                const double div =
                    0.5 * (double(v.at(0, i + 1, j, k)) - double(v.at(0, i - 1, j, k))) +
                    0.5 * (double(v.at(1, i, j + 1, k)) - double(v.at(1, i, j - 1, k))) +
                    0.5 * (double(v.at(2, i, j, k + 1)) - double(v.at(2, i, j, k - 1)));
                dmax = std::max(dmax, std::fabs(div));
            }
    CHECK(dmax <= 1e-6 * vmax);
}

TEST_CASE("zero potential gives identity maps") {
    GridSpec g{12, 12, 12};
    MotionSpec spec;
    spec.seed = 3;
    spec.amplitude = 0.0;  // scale factor kills the field
    auto maps = make_divergence_free_motion(spec, g, 3);
    const VectorField id = VectorField::identity_map(g);
    for (const auto& d : maps)
        for (int c = 0; c < 3; ++c)
            for (std::int64_t i = 0; i < g.count(); ++i)
                CHECK(d.phi.comp[size_t(c)][size_t(i)] == id.comp[size_t(c)][size_t(i)]);
}

TEST_CASE("integrated motion is incompressible and fold-free in the stated regime") {
    GridSpec g{48, 48, 48};
    MotionSpec spec;
    spec.seed = 21;
    spec.amplitude = 3.0;
    spec.smoothness = 6.0;
    auto maps = make_divergence_free_motion(spec, g, 4);
    const Volume det = jacobian_det(maps.back());
    double mean = 0.0;
    std::int64_t count = 0, neg = 0;
    for (int k = 1; k < g.nz - 1; ++k)
        for (int j = 1; j < g.ny - 1; ++j)
            for (int i = 1; i < g.nx - 1; ++i) {
                mean += det.at(i, j, k);
                ++count;
                if (det.at(i, j, k) < 0) ++neg;
            }
    mean /= double(count);
    CHECK(mean >= 0.98);
    CHECK(mean <= 1.02);
    CHECK(neg == 0);
}

TEST_CASE("render_sequence: frame 1 with identity fading matches the forward op bit for bit") {
    GridSpec g{24, 24, 24};
    const Volume phantom = render_phantom(make_phantom_spec(g, 3, Rng(7)));
    MotionSpec mspec;
    mspec.seed = 9;
    mspec.amplitude = 1.0;
    mspec.smoothness = 6.0;
    auto motion = make_divergence_free_motion(mspec, g, 2);

    SequenceSpec seq;
    seq.frames = 2;
    seq.alpha = TagParams{0.7, 8.0, 0.2, 0.3};
    seq.gamma = PsfParams{0.8, 0.8, 0.8};
    seq.noise_sigma = 0.0;
    auto sim = render_sequence(phantom, motion, seq, Rng(13));

    for (auto o : kAllOrientations) {
        // shared-path check: same composition as forward_measure
        const Volume direct = forward_measure(phantom, o, seq.alpha, seq.gamma,
                                              seq.beta_at(1), motion[0].phi);
        const auto& got = sim.g[0][size_t(o)];
        for (std::int64_t i = 0; i < g.count(); ++i)
            CHECK(got.data[size_t(i)] == direct.data[size_t(i)]);
    }

    // ground-truth bundle consistency
    CHECK(sim.truth.beta[0].scale == doctest::Approx(1.0));
    CHECK(sim.truth.beta[0].shift == doctest::Approx(0.0));
    CHECK(sim.truth.cine.size() == 2);
}

TEST_CASE("fading to pure DC suppresses the harmonic peak") {
    GridSpec g{32, 16, 16};
    const Volume phantom = render_phantom(make_phantom_spec(g, 2, Rng(19)));
    std::vector<DeformField> still;
    for (int t = 0; t < 4; ++t) still.push_back(DeformField{VectorField::identity_map(g), 0});

    SequenceSpec seq;
    seq.frames = 4;
    seq.alpha = TagParams{0.9, 8.0, 0.0, 0.1};
    seq.gamma = PsfParams{0, 0, 0};
    seq.fade_scale = 1.0 / 3.0;  // beta1: 1 -> 0 across 4 frames
    seq.fade_shift = 0.1;
    auto sim = render_sequence(phantom, still, seq, Rng(23));

    auto harmonic_mag = [&](const Volume& vol) {
        const ComplexVolume f = dft3_forward(vol);
        const int bin = int(std::lround(double(g.nx) / 8.0));  // tag frequency along x
        return std::hypot(f.re[size_t(g.index(bin, 0, 0))], f.im[size_t(g.index(bin, 0, 0))]);
    };
    const double early = harmonic_mag(sim.g[0][0]);
    const double late = harmonic_mag(sim.g[3][0]);
    CHECK(late <= 0.10 * early);
}

TEST_CASE("same seed reproduces the noise bit for bit") {
    GridSpec g{16, 16, 16};
    const Volume phantom = render_phantom(make_phantom_spec(g, 2, Rng(29)));
    std::vector<DeformField> still = {DeformField{VectorField::identity_map(g), 0}};
    SequenceSpec seq;
    seq.frames = 1;
    seq.alpha = TagParams{0.7, 8.0, 0.0, 0.3};
    seq.noise_sigma = 0.01;
    auto a = render_sequence(phantom, still, seq, Rng(31));
    auto b = render_sequence(phantom, still, seq, Rng(31));
    for (auto o : kAllOrientations)
        for (std::int64_t i = 0; i < g.count(); ++i)
            CHECK(a.g[0][size_t(o)].data[size_t(i)] == b.g[0][size_t(o)].data[size_t(i)]);
}

TEST_CASE("measurement intensities stay inside the physical envelope") {
    GridSpec g{24, 24, 24};
    const Volume phantom = render_phantom(make_phantom_spec(g, 4, Rng(37)));
    MotionSpec mspec;
    mspec.seed = 41;
    mspec.amplitude = 2.0;
    mspec.smoothness = 8.0;
    auto motion = make_divergence_free_motion(mspec, g, 3);
    SequenceSpec seq;
    seq.frames = 3;
    seq.alpha = TagParams{1.0, 10.0, 0.0, 0.5};
    seq.gamma = PsfParams{1, 1, 1};
    seq.noise_sigma = 0.01;
    auto sim = render_sequence(phantom, motion, seq, Rng(43));
    for (const auto& frame : sim.g)
        for (const auto& vol : frame)
            for (float v : vol.data) {
                CHECK(v >= -0.5f);
                CHECK(v <= 1.8f);
            }
}

TEST_SUITE_END();
