#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace invtag {

struct DeConfig {
    int population = 30;
    // F dithered per generation in [mutation_min, mutation_max); set both to
    // the same value for a fixed mutation factor.
    double mutation_min = 0.5;
    double mutation_max = 1.0;
    double crossover = 0.9;  // CR
    double rel_tol = 1e-2;
    int max_iters = 200;
    std::uint64_t seed = 0;
    /// Dispersion: stop when std of population objectives <= rel_tol*|mean|.
    /// BestChange: stop when the best objective improves by less than rel_tol
    /// (relatively) over one generation.
    enum class TolMode { Dispersion, BestChange } tol_mode = TolMode::Dispersion;
};

struct DeResult {
    std::vector<double> x;
    double fx = 0.0;
    int evals = 0;
    int iters = 0;
};

using Objective = std::function<double(std::span<const double>)>;

/// Bounded best/1/bin differential evolution. Candidates are clipped to the
/// box; objectives that throw or return non-finite values score +inf. The
/// incumbent (when given) is seeded into the initial population, so the
/// returned best is never worse than it. Deterministic for a fixed seed and
/// independent of the thread count (population evaluations are parallel but
/// selection is sequential).
DeResult de_minimize(const Objective& f, std::span<const std::pair<double, double>> bounds,
                     std::span<const double> incumbent, const DeConfig& cfg);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double lr = 5e-4;
    double eps = 1e-8;
    int steps = 2000;
    /// Optional early stop: quit when the best loss improved by less than
    /// this relative amount over the last `patience` steps. 0 disables.
    double early_stop_rel = 0.0;
    int patience = 30;
};

struct AdamResult {
    std::vector<double> x;   // best iterate by loss
    double fx = 0.0;         // loss at best iterate
    std::vector<double> trace;
    int steps_run = 0;
};

using GradFn = std::function<double(std::span<const double>, std::vector<double>&)>;

/// Standard bias-corrected Adam with a fixed step budget; returns the best
/// iterate seen. Non-finite gradients abort with the loss trace attached.
AdamResult adam_minimize(const GradFn& grad_fn, std::vector<double> theta0, const AdamConfig& cfg);

}  // namespace invtag
