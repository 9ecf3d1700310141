#include "invtag/sampler.hpp"

#include <cmath>

#include "invtag/error.hpp"
#include "invtag/parallel.hpp"

namespace invtag {

void SamplerConfig::validate() const {
    schedule.validate();
    check(rho_star >= 0.0, "rho_star must be >= 0");
    check(ddim_eta >= 0.0 && ddim_eta <= 1.0, "ddim_eta must be in [0, 1]");
    check(schedule.N >= 2, "sampler needs at least 2 steps");
}

namespace {

Volume tweedie_from_score(const Volume& a, int i, const NoiseSchedule& sched, const Volume& s) {
    const double kbar = sched.kbar(i);
    check(kbar > 0.0, "tweedie: kappa_bar(%d) = %g must be > 0", i, kbar);
    const double inv_root = 1.0 / std::sqrt(kbar);
    const double w = 1.0 - kbar;
    Volume out(a.grid);
    parallel_for(a.size(), [&](std::int64_t idx) {
        out.data[size_t(idx)] =
            float((double(a.data[size_t(idx)]) + w * double(s.data[size_t(idx)])) * inv_root);
    });
    return out;
}

GuidanceResult guidance_from_score(const Volume& a_tau, int i, const Volume& s,
                                   const LinearForward& A, std::span<const Volume> g,
                                   const ScoreModel& prior, bool exact_jvp) {
    const NoiseSchedule& sched = prior.schedule();
    const Volume a0 = tweedie_from_score(a_tau, i, sched, s);
    Volume G;
    GuidanceResult res;
    res.lrec = A.loss_and_grad(a0, g, &G);
    check(std::isfinite(res.lrec), "likelihood_grad: non-finite residual loss (forward stage)");

    const double kbar = sched.kbar(i);
    const double inv_root = 1.0 / std::sqrt(kbar);
    if (exact_jvp) {
        const Volume jg = prior.jvp(a_tau, i, G);
        res.grad = Volume(a_tau.grid);
        parallel_for(G.size(), [&](std::int64_t idx) {
            res.grad.data[size_t(idx)] = float(
                (double(G.data[size_t(idx)]) + (1.0 - kbar) * double(jg.data[size_t(idx)])) *
                inv_root);
        });
    } else {
        res.grad = std::move(G);
        parallel_for(res.grad.size(), [&](std::int64_t idx) {
            res.grad.data[size_t(idx)] = float(double(res.grad.data[size_t(idx)]) * inv_root);
        });
    }
    for (float v : res.grad.data)
        check(std::isfinite(v), "likelihood_grad: non-finite gradient (chain stage)");
    return res;
}

}  // namespace

Volume tweedie_denoise(const Volume& a_tau, int i, const ScoreModel& prior) {
    check(i >= 0 && i <= prior.schedule().N, "tweedie: step %d out of range", i);
    return tweedie_from_score(a_tau, i, prior.schedule(), prior.score(a_tau, i));
}

GuidanceResult likelihood_grad(const Volume& a_tau, int i, const LinearForward& A,
                               std::span<const Volume> g, const ScoreModel& prior, bool exact_jvp) {
    check(i >= 1 && i <= prior.schedule().N, "likelihood_grad: step %d out of range", i);
    return guidance_from_score(a_tau, i, prior.score(a_tau, i), A, g, prior, exact_jvp);
}

DpsResult dps_sample(const std::optional<Volume>& warm, int start_step, std::span<const Volume> g,
                     const LinearForward* A, const ScoreModel& prior, const SamplerConfig& cfg,
                     Rng rng) {
    cfg.validate();
    const NoiseSchedule& sched = cfg.schedule;
    const bool guided = cfg.rho_star > 0.0;
    check(!guided || (A != nullptr && g.size() == 3), "guided sampling needs the forward operator");

    int start = start_step > 0 ? start_step : sched.N;
    check(start >= 1 && start <= sched.N, "dps_sample: bad start step %d", start);

    // Chain state: fresh noise, or the warm volume forward-noised to `start`.
    Volume a;
    Rng noise = rng.sub(0x6e6f6973);  // draws are a pure function of (seed, index)
    if (warm.has_value()) {
        const double kbar = sched.kbar(start);
        a = Volume(warm->grid);
        const double root = std::sqrt(kbar), sd = std::sqrt(1.0 - kbar);
        for (std::int64_t idx = 0; idx < a.size(); ++idx)
            a.data[size_t(idx)] =
                float(root * double(warm->data[size_t(idx)]) + sd * noise.normal());
    } else {
        check(start == sched.N, "fresh chains must start at step N");
        a = Volume(prior.grid());
        for (auto& v : a.data) v = float(noise.normal());
    }

    DpsResult res;
    res.trace.reserve(size_t(start));
    Rng anc = rng.sub(0x616e6365);

    for (int i = start; i >= 1; --i) {
        const Volume s = prior.score(a, i);
        const Volume a0 = tweedie_from_score(a, i, sched, s);

        GuidanceResult gu;
        double rho = 0.0;
        if (guided) {
            gu = guidance_from_score(a, i, s, *A, g, prior, cfg.exact_jvp);
            rho = cfg.rho_star / std::max(gu.lrec, cfg.lrec_floor);
            if (cfg.rho_cap > 0.0 && rho > cfg.rho_cap) rho = cfg.rho_cap;
        }

        const double kbar_i = sched.kbar(i);
        const double kbar_p = sched.kbar(i - 1);
        const double beta_i = sched.beta[size_t(i - 1)];
        const double sigma =
            cfg.ddim_eta > 0.0 && i > 1
                ? cfg.ddim_eta * std::sqrt((1.0 - kbar_p) / (1.0 - kbar_i) * beta_i)
                : 0.0;
        const double eps_coef = -std::sqrt(1.0 - kbar_i);  // eps_hat = eps_coef * score
        const double dir = std::sqrt(std::max(1.0 - kbar_p - sigma * sigma, 0.0));
        const double root_p = std::sqrt(kbar_p);

        Volume next(a.grid);
        parallel_for(a.size(), [&](std::int64_t idx) {
            next.data[size_t(idx)] = float(root_p * double(a0.data[size_t(idx)]) +
                                           dir * eps_coef * double(s.data[size_t(idx)]));
        });
        if (sigma > 0.0) {
            for (std::int64_t idx = 0; idx < next.size(); ++idx)
                next.data[size_t(idx)] = float(double(next.data[size_t(idx)]) + sigma * anc.normal());
        }

        double gnorm = 0.0;
        if (guided) {
            gnorm = std::sqrt(block_sum(gu.grad.size(), [&](std::int64_t idx) {
                const double v = double(gu.grad.data[size_t(idx)]);
                return v * v;
            }));
            parallel_for(next.size(), [&](std::int64_t idx) {
                next.data[size_t(idx)] =
                    float(double(next.data[size_t(idx)]) - rho * double(gu.grad.data[size_t(idx)]));
            });
        }
        a = std::move(next);
        res.trace.push_back({i, gu.lrec, gnorm});

        // Divergence guard: loss exploding by more than 10x across a 10-step
        // window. The near-zero fit regime oscillates harmlessly (the rho =
        // rho*/L_rec step grows as the fit tightens), so the ratio test only
        // counts once the loss is a meaningful fraction of its starting value.
        const size_t n = res.trace.size();
        if (guided && n >= 11) {
            const double now = res.trace[n - 1].lrec;
            const double then = res.trace[n - 11].lrec;
            const double scale = res.trace[0].lrec;
            if (then > 0.0 && now > 10.0 * then && now > 1e-2 * scale) {
                res.diverged = true;
                res.note = strprintf("L_rec grew %gx over 10 steps (step %d: %g -> %g)",
                                     now / then, i, then, now);
                res.a0 = std::move(a);
                return res;
            }
        }
    }
    res.a0 = std::move(a);
    return res;
}

}  // namespace invtag
