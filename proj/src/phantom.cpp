#include "invtag/phantom.hpp"

#include <cmath>

#include "invtag/conv.hpp"
#include "invtag/error.hpp"
#include "invtag/interp.hpp"
#include "invtag/parallel.hpp"

namespace invtag {

double ellipsoid_signed_distance(const Ellipsoid& e, double x, double y, double z) {
    const double ca = std::cos(e.euler_zyx[0]), sa = std::sin(e.euler_zyx[0]);
    const double cb = std::cos(e.euler_zyx[1]), sb = std::sin(e.euler_zyx[1]);
    const double cc = std::cos(e.euler_zyx[2]), sc = std::sin(e.euler_zyx[2]);
    const double dx = x - e.center[0], dy = y - e.center[1], dz = z - e.center[2];
    // R = Rz(a) Ry(b) Rx(c); rotate the offset into the ellipsoid frame (R^T d)
    const double r00 = ca * cb, r01 = ca * sb * sc - sa * cc, r02 = ca * sb * cc + sa * sc;
    const double r10 = sa * cb, r11 = sa * sb * sc + ca * cc, r12 = sa * sb * cc - ca * sc;
    const double r20 = -sb, r21 = cb * sc, r22 = cb * cc;
    const double ex = r00 * dx + r10 * dy + r20 * dz;
    const double ey = r01 * dx + r11 * dy + r21 * dz;
    const double ez = r02 * dx + r12 * dy + r22 * dz;
    const double q = std::sqrt(ex * ex / (e.semi_axes[0] * e.semi_axes[0]) +
                               ey * ey / (e.semi_axes[1] * e.semi_axes[1]) +
                               ez * ez / (e.semi_axes[2] * e.semi_axes[2]));
    const double rmin = std::min({e.semi_axes[0], e.semi_axes[1], e.semi_axes[2]});
    return (q - 1.0) * rmin;
}

Volume render_phantom(const PhantomSpec& spec) {
    const GridSpec g = spec.grid;
    Volume out(g, float(spec.background));
    parallel_for(g.count(), [&](std::int64_t idx) {
        const int i = int(idx % g.nx);
        const int j = int((idx / g.nx) % g.ny);
        const int k = int(idx / (std::int64_t(g.nx) * g.ny));
        double acc = spec.background;
        for (const auto& e : spec.ellipsoids) {
            const double s = ellipsoid_signed_distance(e, i, j, k);
            const double ind =
                e.edge_softness > 0.0 ? 1.0 / (1.0 + std::exp(s / e.edge_softness)) : (s < 0.0 ? 1.0 : 0.0);
            acc += e.intensity * ind;
        }
        out.data[size_t(idx)] = float(acc < 0.0 ? 0.0 : (acc > 1.0 ? 1.0 : acc));
    });
    return out;
}

PhantomSpec make_phantom_spec(GridSpec g, int inner, Rng rng) {
    PhantomSpec spec;
    spec.grid = g;
    const double cx = 0.5 * (g.nx - 1), cy = 0.5 * (g.ny - 1), cz = 0.5 * (g.nz - 1);
    const double R = 0.38 * std::min({double(g.nx), double(g.ny), double(g.nz)});

    Ellipsoid head;
    head.center = {cx, cy, cz};
    head.semi_axes = {R * (0.95 + 0.1 * rng.uniform()), R * (0.85 + 0.1 * rng.uniform()),
                      R * (0.9 + 0.1 * rng.uniform())};
    head.euler_zyx = {0.3 * rng.uniform(), 0.3 * rng.uniform(), 0.3 * rng.uniform()};
    head.intensity = 0.45;
    head.edge_softness = 1.2;
    spec.ellipsoids.push_back(head);

    for (int k = 0; k < inner; ++k) {
        Ellipsoid e;
        const double u = 2.0 * rng.uniform() - 1.0;
        const double phi_ang = 2.0 * M_PI * rng.uniform();
        const double rad = 0.55 * R * std::cbrt(rng.uniform());
        const double s = std::sqrt(std::max(0.0, 1.0 - u * u));
        e.center = {cx + rad * s * std::cos(phi_ang), cy + rad * s * std::sin(phi_ang), cz + rad * u};
        e.semi_axes = {R * (0.1 + 0.2 * rng.uniform()), R * (0.1 + 0.2 * rng.uniform()),
                       R * (0.1 + 0.2 * rng.uniform())};
        e.euler_zyx = {2 * M_PI * rng.uniform(), M_PI * rng.uniform(), 2 * M_PI * rng.uniform()};
        e.intensity = (k % 2 == 0 ? 0.35 : -0.2) * (0.7 + 0.6 * rng.uniform());
        e.edge_softness = 0.6 + 0.8 * rng.uniform();
        spec.ellipsoids.push_back(e);
    }
    return spec;
}

PhantomSpec jitter_phantom_spec(const PhantomSpec& spec, double rel, Rng rng) {
    PhantomSpec out = spec;
    for (auto& e : out.ellipsoids) {
        for (int c = 0; c < 3; ++c) {
            e.center[size_t(c)] += rel * e.semi_axes[size_t(c)] * (2.0 * rng.uniform() - 1.0);
            e.semi_axes[size_t(c)] *= 1.0 + rel * (2.0 * rng.uniform() - 1.0);
        }
        e.intensity *= 1.0 + rel * (2.0 * rng.uniform() - 1.0);
    }
    return out;
}

VectorField make_divergence_free_velocity(const MotionSpec& spec, GridSpec g) {
    check(spec.smoothness > 0.0, "motion smoothness must be > 0");
    // Vector potential on a padded grid, so the curl below is a pure central
    // difference at every voxel of the working grid.
    const GridSpec pg{g.nx + 2, g.ny + 2, g.nz + 2};
    std::array<Volume, 3> psi = {Volume(pg), Volume(pg), Volume(pg)};
    Rng rng = Rng(spec.seed).sub(0x700531);
    for (auto& comp : psi) {
        for (auto& v : comp.data) v = float(rng.normal());
        comp = conv_gaussian(comp, spec.smoothness, spec.smoothness, spec.smoothness);
    }

    // Taper the potential to zero at the boundary (value and slope), so the
    // curl keeps particles from drifting out of the domain. Windowing the
    // potential, not the velocity, preserves exact divergence-freeness.
    const int margin = std::max(3, std::min({g.nx, g.ny, g.nz}) / 8);
    auto window1 = [&](int idx, int n) {
        const double d = std::min(idx, n - 1 - idx);
        if (d >= margin) return 1.0;
        const double u = std::sin(0.5 * M_PI * d / margin);
        return u * u;
    };
    parallel_for(pg.count(), [&](std::int64_t idx) {
        const int i = int(idx % pg.nx);
        const int j = int((idx / pg.nx) % pg.ny);
        const int k = int(idx / (std::int64_t(pg.nx) * pg.ny));
        const double w = window1(i, pg.nx) * window1(j, pg.ny) * window1(k, pg.nz);
        for (auto& comp : psi) comp.data[size_t(idx)] = float(double(comp.data[size_t(idx)]) * w);
    });

    VectorField v(g);
    const std::int64_t n = g.count();
    parallel_for(n, [&](std::int64_t idx) {
        const int i = int(idx % g.nx) + 1;
        const int j = int((idx / g.nx) % g.ny) + 1;
        const int k = int(idx / (std::int64_t(g.nx) * g.ny)) + 1;
        auto d = [&](const Volume& f, int axis) {
            if (axis == 0) return 0.5 * (double(f.at(i + 1, j, k)) - double(f.at(i - 1, j, k)));
            if (axis == 1) return 0.5 * (double(f.at(i, j + 1, k)) - double(f.at(i, j - 1, k)));
            return 0.5 * (double(f.at(i, j, k + 1)) - double(f.at(i, j, k - 1)));
        };
        // v = curl(psi)
        v.comp[0][size_t(idx)] = float(d(psi[2], 1) - d(psi[1], 2));
        v.comp[1][size_t(idx)] = float(d(psi[0], 2) - d(psi[2], 0));
        v.comp[2][size_t(idx)] = float(d(psi[1], 0) - d(psi[0], 1));
    });

    double vmax = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double m = std::sqrt(double(v.comp[0][size_t(i)]) * v.comp[0][size_t(i)] +
                                   double(v.comp[1][size_t(i)]) * v.comp[1][size_t(i)] +
                                   double(v.comp[2][size_t(i)]) * v.comp[2][size_t(i)]);
        vmax = std::max(vmax, m);
    }
    const double scale = vmax > 0.0 ? spec.amplitude / vmax : 0.0;
    for (auto& c : v.comp)
        for (auto& x : c) x = float(double(x) * scale);
    return v;
}

std::vector<DeformField> make_divergence_free_motion(const MotionSpec& spec, GridSpec g, int T) {
    check(T >= 1, "need at least one frame");
    const VectorField v = make_divergence_free_velocity(spec, g);

    // RK4 on dx/dtau = -v(x): the inverse of the forward flow for a
    // stationary field, which is exactly the frame->reference map.
    auto vel = [&](double x, double y, double z) {
        const auto s = sample_field_at(v, x, y, z);
        return std::array<double, 3>{-s[0], -s[1], -s[2]};
    };

    std::vector<DeformField> out;
    const double h = (1.0 / T) / spec.rk4_steps;
    VectorField cur = VectorField::identity_map(g);
    for (int t = 1; t <= T; ++t) {
        const std::int64_t n = g.count();
        parallel_for(n, [&](std::int64_t idx) {
            double x = cur.comp[0][size_t(idx)];
            double y = cur.comp[1][size_t(idx)];
            double z = cur.comp[2][size_t(idx)];
            for (int s = 0; s < spec.rk4_steps; ++s) {
                const auto k1 = vel(x, y, z);
                const auto k2 = vel(x + 0.5 * h * k1[0], y + 0.5 * h * k1[1], z + 0.5 * h * k1[2]);
                const auto k3 = vel(x + 0.5 * h * k2[0], y + 0.5 * h * k2[1], z + 0.5 * h * k2[2]);
                const auto k4 = vel(x + h * k3[0], y + h * k3[1], z + h * k3[2]);
                x += h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]);
                y += h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]);
                z += h / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]);
            }
            cur.comp[0][size_t(idx)] = float(x);
            cur.comp[1][size_t(idx)] = float(y);
            cur.comp[2][size_t(idx)] = float(z);
        });
        // in-domain check (trajectories may not stray far outside)
        for (std::int64_t idx = 0; idx < n; ++idx) {
            check(cur.comp[0][size_t(idx)] > -2.0 && cur.comp[0][size_t(idx)] < g.nx + 1.0 &&
                      cur.comp[1][size_t(idx)] > -2.0 && cur.comp[1][size_t(idx)] < g.ny + 1.0 &&
                      cur.comp[2][size_t(idx)] > -2.0 && cur.comp[2][size_t(idx)] < g.nz + 1.0,
                  "motion trajectory left the domain by more than 2 voxels; reduce the amplitude");
        }
        out.push_back(DeformField{cur, 0});
    }
    return out;
}

SimulatedSequence render_sequence(const Volume& phantom, const std::vector<DeformField>& motion,
                                  const SequenceSpec& seq, Rng rng) {
    check(int(motion.size()) == seq.frames, "render_sequence: motion/frames mismatch");
    SimulatedSequence sim;
    sim.truth.anatomy = phantom;
    sim.truth.alpha = seq.alpha;
    sim.truth.gamma = seq.gamma;
    sim.truth.noise_sigma = seq.noise_sigma;

    for (int t = 1; t <= seq.frames; ++t) {
        const FadingParams beta = seq.beta_at(t);
        const DeformField& phi = motion[size_t(t - 1)];
        std::array<Volume, 3> frame;
        for (auto o : kAllOrientations) {
            Volume g = forward_measure(phantom, o, seq.alpha, seq.gamma, beta, phi.phi);
            if (seq.noise_sigma > 0.0) {
                float lo = g.data[0], hi = g.data[0];
                for (float x : g.data) {
                    lo = std::min(lo, x);
                    hi = std::max(hi, x);
                }
                const double sd = seq.noise_sigma * (double(hi) - double(lo));
                Rng nrng = rng.sub(std::uint64_t(t) * 8 + std::uint64_t(o));
                for (auto& x : g.data) x = float(double(x) + sd * nrng.normal());
            }
            frame[size_t(o)] = std::move(g);
        }
        sim.g.push_back(std::move(frame));
        sim.truth.beta.push_back(beta);
        sim.truth.cine.push_back(pullback(phantom, phi.phi));
        sim.truth.deform.push_back(phi);
    }
    return sim;
}

}  // namespace invtag
