#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "invtag/forward_model.hpp"
#include "invtag/prior.hpp"
#include "invtag/rng.hpp"

namespace invtag {

struct SamplerConfig {
    NoiseSchedule schedule;
    double rho_star = 100.0;  // 0 disables guidance (pure prior sampling)
    double ddim_eta = 0.0;    // 0 = deterministic DDIM, 1 = ancestral
    bool exact_jvp = true;    // chain the likelihood gradient through the score Jacobian
    double lrec_floor = 1e-8;
    /// Stability cap on the guidance step size. rho = rho*/L_rec grows without
    /// bound as the residual shrinks (reachable on noiseless synthetic data),
    /// but gradient steps on ||g - A a||^2 are only stable for rho below
    /// ~1/sigma_max(A^T A); at paper-scale voxel counts L_rec never gets small
    /// enough to matter, at desk scale it does.
    double rho_cap = 0.5;

    void validate() const;
};

/// Tweedie posterior-mean denoiser: (a + (1 - kbar_i) * score) / sqrt(kbar_i).
Volume tweedie_denoise(const Volume& a_tau, int i, const ScoreModel& prior);

struct GuidanceResult {
    Volume grad;      // d L_rec(a0_hat(a_tau)) / d a_tau
    double lrec = 0;  // L_rec at a0_hat
};

/// DPS likelihood gradient: adjoint of the frozen forward model applied to the
/// residual at the Tweedie estimate, chained through the score Jacobian (exact
/// mode) or taken as-is (identity approximation).
GuidanceResult likelihood_grad(const Volume& a_tau, int i, const LinearForward& A,
                               std::span<const Volume> g, const ScoreModel& prior, bool exact_jvp);

struct DpsTraceRow {
    int step = 0;
    double lrec = 0.0;
    double guidance_norm = 0.0;
};

struct DpsResult {
    Volume a0;
    std::vector<DpsTraceRow> trace;
    bool diverged = false;
    std::string note;
};

/// Reverse sweep i = start..1. With `warm` set, the chain starts from the
/// forward-noised warm volume at `start_step`; otherwise from fresh noise at
/// step N. Guidance is skipped entirely when rho_star == 0.
DpsResult dps_sample(const std::optional<Volume>& warm, int start_step,
                     std::span<const Volume> g, const LinearForward* A, const ScoreModel& prior,
                     const SamplerConfig& cfg, Rng rng);

}  // namespace invtag
