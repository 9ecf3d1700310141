#include "invtag/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "invtag/error.hpp"
#include "invtag/parallel.hpp"
#include "invtag/rng.hpp"

namespace invtag {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_eval(const Objective& f, std::span<const double> x) {
    double v;
    try {
        v = f(x);
    } catch (...) {
        return kInf;  // singular forward evaluations score +inf
    }
    return std::isfinite(v) ? v : kInf;
}

}  // namespace

DeResult de_minimize(const Objective& f, std::span<const std::pair<double, double>> bounds,
                     std::span<const double> incumbent, const DeConfig& cfg) {
    const int d = int(bounds.size());
    check(d >= 1, "de_minimize: empty bounds");
    check(cfg.population >= 5, "de_minimize: population must be >= 5");
    for (const auto& [lo, hi] : bounds)
        check(std::isfinite(lo) && std::isfinite(hi) && lo < hi, "de_minimize: bad bounds");
    check(incumbent.empty() || int(incumbent.size()) == d, "de_minimize: incumbent size mismatch");

    const int np = cfg.population;
    Rng rng = Rng(cfg.seed).sub(0xde000001);

    auto clip = [&](double v, int j) {
        const auto& [lo, hi] = bounds[size_t(j)];
        return v < lo ? lo : (v > hi ? hi : v);
    };

    const size_t npz = size_t(np), dz = size_t(d);
    std::vector<std::vector<double>> pop(npz, std::vector<double>(dz));
    for (int i = 0; i < np; ++i)
        for (int j = 0; j < d; ++j) {
            const auto& [lo, hi] = bounds[size_t(j)];
            pop[size_t(i)][size_t(j)] = lo + (hi - lo) * rng.uniform();
        }
    if (!incumbent.empty())
        for (int j = 0; j < d; ++j) pop[0][size_t(j)] = clip(incumbent[size_t(j)], j);

    std::vector<double> energy(npz);
    int evals = 0;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int i = 0; i < np; ++i) energy[size_t(i)] = safe_eval(f, pop[size_t(i)]);
    evals += np;

    auto best_index = [&]() {
        int b = 0;
        for (int i = 1; i < np; ++i)
            if (energy[size_t(i)] < energy[size_t(b)]) b = i;
        return b;
    };

    check(cfg.mutation_min <= cfg.mutation_max, "de_minimize: bad mutation range");
    int iters = 0;
    double prev_best = energy[size_t(best_index())];
    for (int gen = 0; gen < cfg.max_iters; ++gen) {
        ++iters;
        const int b = best_index();
        const double F = cfg.mutation_min == cfg.mutation_max
                             ? cfg.mutation_min
                             : cfg.mutation_min + (cfg.mutation_max - cfg.mutation_min) * rng.uniform();

        // All random draws happen up front so evaluation order cannot change
        // the stream.
        std::vector<std::vector<double>> trial(npz, std::vector<double>(dz));
        for (int i = 0; i < np; ++i) {
            int r1 = i, r2 = i;
            while (r1 == i) r1 = int(rng.below(std::uint64_t(np)));
            while (r2 == i || r2 == r1) r2 = int(rng.below(std::uint64_t(np)));
            const int jrand = int(rng.below(std::uint64_t(d)));
            for (int j = 0; j < d; ++j) {
                const bool cross = rng.uniform() < cfg.crossover || j == jrand;
                const double m = pop[size_t(b)][size_t(j)] +
                                 F * (pop[size_t(r1)][size_t(j)] - pop[size_t(r2)][size_t(j)]);
                trial[size_t(i)][size_t(j)] = cross ? clip(m, j) : pop[size_t(i)][size_t(j)];
            }
        }

        std::vector<double> trial_energy(npz);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
        for (int i = 0; i < np; ++i) trial_energy[size_t(i)] = safe_eval(f, trial[size_t(i)]);
        evals += np;

        for (int i = 0; i < np; ++i) {
            if (trial_energy[size_t(i)] <= energy[size_t(i)]) {
                pop[size_t(i)] = std::move(trial[size_t(i)]);
                energy[size_t(i)] = trial_energy[size_t(i)];
            }
        }

        // Convergence tests on the updated population.
        double mean = 0.0;
        int finite = 0;
        for (int i = 0; i < np; ++i)
            if (std::isfinite(energy[size_t(i)])) {
                mean += energy[size_t(i)];
                ++finite;
            }
        if (finite == np) {
            mean /= double(np);
            if (cfg.tol_mode == DeConfig::TolMode::Dispersion) {
                double var = 0.0;
                for (int i = 0; i < np; ++i) {
                    const double dlt = energy[size_t(i)] - mean;
                    var += dlt * dlt;
                }
                if (std::sqrt(var / double(np)) <= cfg.rel_tol * std::fabs(mean)) break;
            } else {
                const double now = energy[size_t(best_index())];
                const double denom = std::max(std::fabs(prev_best), 1e-30);
                if (std::fabs(prev_best - now) <= cfg.rel_tol * denom) break;
                prev_best = now;
            }
        }
    }

    const int b = best_index();
    return DeResult{pop[size_t(b)], energy[size_t(b)], evals, iters};
}

AdamResult adam_minimize(const GradFn& grad_fn, std::vector<double> theta0, const AdamConfig& cfg) {
    check(cfg.lr > 0.0, "adam: lr must be > 0");
    const size_t n = theta0.size();
    std::vector<double> theta = std::move(theta0);
    std::vector<double> m(n, 0.0), v(n, 0.0), grad(n, 0.0);

    AdamResult res;
    res.x = theta;
    res.fx = kInf;
    res.trace.reserve(size_t(cfg.steps));

    double best_at_window = kInf;
    for (int t = 1; t <= cfg.steps; ++t) {
        const double loss = grad_fn(theta, grad);
        for (double gv : grad)
            check(std::isfinite(gv), "adam: non-finite gradient at step %d (loss %g)", t, loss);
        res.trace.push_back(loss);
        res.steps_run = t;
        if (loss < res.fx) {
            res.fx = loss;
            res.x = theta;
        }

        const double c1 = 1.0 - std::pow(cfg.beta1, t);
        const double c2 = 1.0 - std::pow(cfg.beta2, t);
        for (size_t i = 0; i < n; ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            theta[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
        }

        if (cfg.early_stop_rel > 0.0 && t % cfg.patience == 0) {
            if (best_at_window - res.fx <= cfg.early_stop_rel * std::max(std::fabs(best_at_window), 1e-30) &&
                std::isfinite(best_at_window))
                break;
            best_at_window = res.fx;
        }
    }
    return res;
}

}  // namespace invtag
