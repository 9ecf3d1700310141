#include "invtag/forward_model.hpp"

#include <cmath>

#include "invtag/conv.hpp"
#include "invtag/error.hpp"
#include "invtag/interp.hpp"
#include "invtag/parallel.hpp"

namespace invtag {

std::array<double, 3> psf_axis_sigmas(TagOrientation o, const PsfParams& p) {
    switch (o) {
        case TagOrientation::X: return {p.perp, p.par, p.thru};
        case TagOrientation::Y: return {p.par, p.perp, p.thru};
        case TagOrientation::Z: return {p.par, p.thru, p.perp};
    }
    check(false, "bad orientation");
    return {};
}

Volume base_tag(const GridSpec& g, TagOrientation o, const TagParams& alpha) {
    check(alpha.spacing > 0.0, "tag spacing must be > 0, got %g", alpha.spacing);
    Volume q(g);
    const double k = 2.0 * M_PI / alpha.spacing;
    parallel_for(g.count(), [&](std::int64_t idx) {
        const int i = int(idx % g.nx);
        const int j = int((idx / g.nx) % g.ny);
        const int kk = int(idx / (std::int64_t(g.nx) * g.ny));
        const double r = o == TagOrientation::X ? i : (o == TagOrientation::Y ? j : kk);
        q.data[size_t(idx)] = float(alpha.amplitude * std::cos(k * r + alpha.phase) + alpha.dc);
    });
    return q;
}

Volume apply_fading(const Volume& q, const FadingParams& beta) {
    Volume out(q.grid);
    parallel_for(q.size(), [&](std::int64_t i) {
        out.data[size_t(i)] = float(std::fabs(beta.scale * double(q.data[size_t(i)]) + beta.shift));
    });
    return out;
}

Volume pullback(const Volume& u, const VectorField& phi, Interp mode) {
    check(u.grid == phi.grid, "pullback: volume and map live on different grids");
    Volume out(u.grid);
    const float* px = phi.comp[0].data();
    const float* py = phi.comp[1].data();
    const float* pz = phi.comp[2].data();
    if (mode == Interp::Trilinear) {
        parallel_for(u.size(), [&](std::int64_t i) {
            out.data[size_t(i)] = float(sample_trilinear_at(u, px[i], py[i], pz[i]));
        });
    } else {
        parallel_for(u.size(), [&](std::int64_t i) {
            out.data[size_t(i)] = float(sample_nearest_at(u, px[i], py[i], pz[i]));
        });
    }
    return out;
}

Volume forward_measure(const Volume& a, TagOrientation o, const TagParams& alpha,
                       const PsfParams& gamma, const FadingParams& beta, const VectorField& phi) {
    Volume q = apply_fading(base_tag(a.grid, o, alpha), beta);
    parallel_for(a.size(), [&](std::int64_t i) {
        q.data[size_t(i)] = float(double(q.data[size_t(i)]) * double(a.data[size_t(i)]));
    });
    Volume warped = pullback(q, phi, Interp::Trilinear);
    const auto s = psf_axis_sigmas(o, gamma);
    return conv_gaussian(warped, s[0], s[1], s[2]);
}

double residual_loss(const Volume& a, const FrameOperator& op, std::span<const Volume> g) {
    check(g.size() == 3, "residual_loss needs all three orientations, got %zu", g.size());
    check(op.phi != nullptr, "residual_loss: missing deformation");
    double total = 0.0;
    for (auto o : kAllOrientations) {
        const Volume model = forward_measure(a, o, op.alpha, op.gamma, op.beta, *op.phi);
        const Volume& meas = g[size_t(o)];
        check(meas.grid == a.grid, "residual_loss: measurement grid mismatch");
        total += block_sum(a.size(), [&](std::int64_t i) {
            const double d = double(meas.data[size_t(i)]) - double(model.data[size_t(i)]);
            return d * d;
        });
    }
    return total;
}

double residual_loss_total(std::span<const double> per_frame) {
    double s = 0.0;
    for (double v : per_frame) s += v;
    return s;
}

LinearForward::LinearForward(GridSpec g, const TagParams& alpha, const PsfParams& gamma,
                             const FadingParams& beta, const VectorField* phi)
    : grid_(g), gamma_(gamma), phi_(phi) {
    check(phi != nullptr && phi->grid == g, "LinearForward: bad deformation");
    for (auto o : kAllOrientations)
        faded_[size_t(o)] = apply_fading(base_tag(g, o, alpha), beta);
}

Volume LinearForward::apply(const Volume& x, TagOrientation o) const {
    check(x.grid == grid_, "LinearForward::apply grid mismatch");
    const Volume& t = faded_[size_t(o)];
    Volume prod(grid_);
    parallel_for(x.size(), [&](std::int64_t i) {
        prod.data[size_t(i)] = float(double(x.data[size_t(i)]) * double(t.data[size_t(i)]));
    });
    Volume warped = pullback(prod, *phi_, Interp::Trilinear);
    const auto s = psf_axis_sigmas(o, gamma_);
    return conv_gaussian(warped, s[0], s[1], s[2]);
}

Volume LinearForward::adjoint(const Volume& y, TagOrientation o) const {
    check(y.grid == grid_, "LinearForward::adjoint grid mismatch");
    const auto s = psf_axis_sigmas(o, gamma_);
    const Volume c = conv_gaussian_adjoint(y, s[0], s[1], s[2]);

    // Adjoint of the clamp-to-edge trilinear pullback: scatter each residual
    // to its 8 source corners. Serial scatter keeps the sum order fixed.
    std::vector<double> acc(size_t(grid_.count()), 0.0);
    const float* px = phi_->comp[0].data();
    const float* py = phi_->comp[1].data();
    const float* pz = phi_->comp[2].data();
    for (std::int64_t i = 0; i < grid_.count(); ++i)
        splat_add(grid_, acc.data(), px[i], py[i], pz[i], double(c.data[size_t(i)]));

    const Volume& t = faded_[size_t(o)];
    Volume out(grid_);
    parallel_for(grid_.count(), [&](std::int64_t i) {
        out.data[size_t(i)] = float(acc[size_t(i)] * double(t.data[size_t(i)]));
    });
    return out;
}

double LinearForward::loss_and_grad(const Volume& a, std::span<const Volume> g, Volume* grad) const {
    check(g.size() == 3, "loss_and_grad needs all three orientations");
    double total = 0.0;
    if (grad) *grad = Volume(grid_);
    for (auto o : kAllOrientations) {
        Volume r = apply(a, o);
        const Volume& meas = g[size_t(o)];
        parallel_for(grid_.count(), [&](std::int64_t i) {
            r.data[size_t(i)] = float(double(r.data[size_t(i)]) - double(meas.data[size_t(i)]));
        });
        total += block_sum(grid_.count(), [&](std::int64_t i) {
            const double d = double(r.data[size_t(i)]);
            return d * d;
        });
        if (grad) {
            parallel_for(grid_.count(), [&](std::int64_t i) {
                r.data[size_t(i)] = float(2.0 * double(r.data[size_t(i)]));
            });
            const Volume gpart = adjoint(r, o);
            parallel_for(grid_.count(), [&](std::int64_t i) {
                grad->data[size_t(i)] += gpart.data[size_t(i)];
            });
        }
    }
    return total;
}

}  // namespace invtag
