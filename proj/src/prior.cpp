#include "invtag/prior.hpp"

#include <algorithm>
#include <cmath>

#include "invtag/error.hpp"
#include "invtag/parallel.hpp"

namespace invtag {

NoiseSchedule NoiseSchedule::linear(int N) {
    check(N >= 2, "noise schedule needs N >= 2, got %d", N);
    NoiseSchedule s;
    s.N = N;
    s.beta.resize(size_t(N));
    s.kappa_bar.resize(size_t(N) + 1);
    s.kappa_bar[0] = 1.0;
    const double bmin = 1e-4, bmax = 2e-2, ref = 1000.0;
    for (int i = 0; i < N; ++i) {
        double b = (bmin + (bmax - bmin) * double(i) / double(N - 1)) * (ref / double(N));
        s.beta[size_t(i)] = std::min(b, 0.95);
        s.kappa_bar[size_t(i) + 1] = s.kappa_bar[size_t(i)] * (1.0 - s.beta[size_t(i)]);
    }
    s.validate();
    return s;
}

void NoiseSchedule::validate() const {
    check(N >= 2 && int(beta.size()) == N && int(kappa_bar.size()) == N + 1,
          "noise schedule: inconsistent sizes");
    check(kappa_bar[0] == 1.0, "noise schedule: kappa_bar[0] must be 1");
    for (int i = 1; i <= N; ++i)
        check(kappa_bar[size_t(i)] < kappa_bar[size_t(i) - 1], "kappa_bar must strictly decrease");
    check(kappa_bar[size_t(N)] < 0.05, "kappa_bar[N] = %g, expected < 0.05", kappa_bar[size_t(N)]);
}

// ---------------------------------------------------------------------------

TemplateBankPrior::TemplateBankPrior(std::vector<Volume> templates, double sigma_p,
                                     NoiseSchedule sched)
    : ScoreModel(std::move(sched)), mu_(std::move(templates)), sigma_p_(sigma_p) {
    check(!mu_.empty(), "template bank must not be empty");
    check(sigma_p_ > 0.0, "sigma_p must be > 0");
    for (const auto& m : mu_) check(m.grid == mu_[0].grid, "templates must share one grid");
}

namespace {

// Per-component log-likelihood terms -||a - sqrt(kbar) mu_k||^2 / (2c); the
// shared Gaussian normalizer cancels in the softmax.
std::vector<double> component_logliks(const std::vector<Volume>& mu, const Volume& a, double root_kbar,
                                      double c) {
    std::vector<double> ll(mu.size());
    for (size_t k = 0; k < mu.size(); ++k) {
        const Volume& m = mu[k];
        const double ss = block_sum(a.size(), [&](std::int64_t i) {
            const double d = double(a.data[size_t(i)]) - root_kbar * double(m.data[size_t(i)]);
            return d * d;
        });
        ll[k] = -0.5 * ss / c;
    }
    return ll;
}

std::vector<double> softmax(std::vector<double> ll) {
    const double m = *std::max_element(ll.begin(), ll.end());
    double z = 0.0;
    for (auto& v : ll) {
        v = std::exp(v - m);
        z += v;
    }
    for (auto& v : ll) v /= z;
    return ll;
}

}  // namespace

std::vector<double> TemplateBankPrior::responsibilities(const Volume& a, int i) const {
    const double kbar = sched_.kbar(i);
    const double c = kbar * sigma_p_ * sigma_p_ + 1.0 - kbar;
    return softmax(component_logliks(mu_, a, std::sqrt(kbar), c));
}

double TemplateBankPrior::log_density_unnormalized(const Volume& a, int i) const {
    const double kbar = sched_.kbar(i);
    const double c = kbar * sigma_p_ * sigma_p_ + 1.0 - kbar;
    auto ll = component_logliks(mu_, a, std::sqrt(kbar), c);
    const double m = *std::max_element(ll.begin(), ll.end());
    double z = 0.0;
    for (double v : ll) z += std::exp(v - m);
    return m + std::log(z / double(mu_.size()));
}

Volume TemplateBankPrior::score(const Volume& a, int i) const {
    check(a.grid == mu_[0].grid, "score: grid mismatch");
    const double kbar = sched_.kbar(i);
    const double root = std::sqrt(kbar);
    const double c = kbar * sigma_p_ * sigma_p_ + 1.0 - kbar;
    const auto r = responsibilities(a, i);

    Volume out(a.grid);
    parallel_for(a.size(), [&](std::int64_t idx) {
        double acc = 0.0;
        for (size_t k = 0; k < mu_.size(); ++k)
            acc += r[k] * (root * double(mu_[k].data[size_t(idx)]) - double(a.data[size_t(idx)]));
        out.data[size_t(idx)] = float(acc / c);
    });
    return out;
}

Volume TemplateBankPrior::jvp(const Volume& a, int i, const Volume& w) const {
    check(a.grid == mu_[0].grid && w.grid == a.grid, "jvp: grid mismatch");
    const double kbar = sched_.kbar(i);
    const double root = std::sqrt(kbar);
    const double c = kbar * sigma_p_ * sigma_p_ + 1.0 - kbar;
    const auto r = responsibilities(a, i);
    const size_t K = mu_.size();

    // J w = sum_k r_k m_k <m_k, w> - s <s, w> - w / c, with m_k the per-
    // component score and s the mixture score.
    std::vector<double> mdotw(K);
    for (size_t k = 0; k < K; ++k) {
        mdotw[k] = block_sum(a.size(), [&](std::int64_t idx) {
                       const double m = (root * double(mu_[k].data[size_t(idx)]) -
                                         double(a.data[size_t(idx)])) / c;
                       return m * double(w.data[size_t(idx)]);
                   });
    }
    double sdotw = 0.0;
    for (size_t k = 0; k < K; ++k) sdotw += r[k] * mdotw[k];

    Volume out(a.grid);
    parallel_for(a.size(), [&](std::int64_t idx) {
        double s = 0.0, first = 0.0;
        for (size_t k = 0; k < K; ++k) {
            const double m = (root * double(mu_[k].data[size_t(idx)]) - double(a.data[size_t(idx)])) / c;
            s += r[k] * m;
            first += r[k] * mdotw[k] * m;
        }
        out.data[size_t(idx)] =
            float(first - s * sdotw - double(w.data[size_t(idx)]) / c);
    });
    return out;
}

Volume TemplateBankPrior::sample_marginal(int i, Rng rng) const {
    const double kbar = sched_.kbar(i);
    const double root = std::sqrt(kbar);
    const double sd = std::sqrt(kbar * sigma_p_ * sigma_p_ + 1.0 - kbar);
    const size_t k = size_t(rng.below(std::uint64_t(mu_.size())));
    Volume out(mu_[0].grid);
    for (std::int64_t idx = 0; idx < out.size(); ++idx)
        out.data[size_t(idx)] = float(root * double(mu_[k].data[size_t(idx)]) + sd * rng.normal());
    return out;
}

// ---------------------------------------------------------------------------

StationaryGPPrior::StationaryGPPrior(Volume mean, double lambda, double p, NoiseSchedule sched)
    : ScoreModel(std::move(sched)), mu0_(std::move(mean)) {
    const GridSpec g = mu0_.grid;
    S_.resize(size_t(g.count()));
    const std::int64_t n = g.count();
    parallel_for(n, [&](std::int64_t idx) {
        const int i = int(idx % g.nx);
        const int j = int((idx / g.nx) % g.ny);
        const int k = int(idx / (std::int64_t(g.nx) * g.ny));
        auto freq = [](int bin, int size) {
            const int s = bin <= size / 2 ? bin : bin - size;
            return double(s) / double(size);  // cycles per voxel
        };
        const double fx = freq(i, g.nx), fy = freq(j, g.ny), fz = freq(k, g.nz);
        const double f2 = fx * fx + fy * fy + fz * fz;
        S_[size_t(idx)] = std::pow(1.0 + lambda * f2, -p);
    });
    for (double s : S_) check(s > 0.0, "GP spectrum must be positive");
    mu0_hat_ = dft3_forward(mu0_);
}

double StationaryGPPrior::log_density_unnormalized(const Volume& a, int i) const {
    const double kbar = sched_.kbar(i);
    const double root = std::sqrt(kbar);
    const ComplexVolume ah = dft3_forward(a);
    const double invN = 1.0 / double(a.size());
    return -0.5 * invN * block_sum(a.size(), [&](std::int64_t idx) {
               const double dr = ah.re[size_t(idx)] - root * mu0_hat_.re[size_t(idx)];
               const double di = ah.im[size_t(idx)] - root * mu0_hat_.im[size_t(idx)];
               const double c = kbar * S_[size_t(idx)] + 1.0 - kbar;
               return (dr * dr + di * di) / c;
           });
}

Volume StationaryGPPrior::score(const Volume& a, int i) const {
    check(a.grid == mu0_.grid, "gp score: grid mismatch");
    const double kbar = sched_.kbar(i);
    const double root = std::sqrt(kbar);
    ComplexVolume ah = dft3_forward(a);
    parallel_for(a.size(), [&](std::int64_t idx) {
        const double c = kbar * S_[size_t(idx)] + 1.0 - kbar;
        ah.re[size_t(idx)] = -(ah.re[size_t(idx)] - root * mu0_hat_.re[size_t(idx)]) / c;
        ah.im[size_t(idx)] = -(ah.im[size_t(idx)] - root * mu0_hat_.im[size_t(idx)]) / c;
    });
    double resid = 0.0;
    Volume out = dft3_inverse(ah, &resid);
    check(resid <= 1e-8 * std::max(1.0, double(*std::max_element(
                                       out.data.begin(), out.data.end(),
                                       [](float x, float y) { return std::fabs(x) < std::fabs(y); }))),
          "gp score: imaginary residue %g too large", resid);
    return out;
}

Volume StationaryGPPrior::jvp(const Volume& a, int i, const Volume& w) const {
    check(w.grid == mu0_.grid, "gp jvp: grid mismatch");
    (void)a;  // linear score: Jacobian independent of a
    const double kbar = sched_.kbar(i);
    ComplexVolume wh = dft3_forward(w);
    parallel_for(w.size(), [&](std::int64_t idx) {
        const double c = kbar * S_[size_t(idx)] + 1.0 - kbar;
        wh.re[size_t(idx)] = -wh.re[size_t(idx)] / c;
        wh.im[size_t(idx)] = -wh.im[size_t(idx)] / c;
    });
    return dft3_inverse(wh);
}

Volume StationaryGPPrior::sample_marginal(int i, Rng rng) const {
    // Spectral sampling: white noise shaped per-bin by sqrt(kbar S + 1 - kbar).
    const GridSpec g = mu0_.grid;
    const double kbar = sched_.kbar(i);
    const double root = std::sqrt(kbar);
    Volume xi(g);
    for (auto& v : xi.data) v = float(rng.normal());
    ComplexVolume xh = dft3_forward(xi);
    parallel_for(g.count(), [&](std::int64_t idx) {
        const double sd = std::sqrt(kbar * S_[size_t(idx)] + 1.0 - kbar);
        xh.re[size_t(idx)] *= sd;
        xh.im[size_t(idx)] *= sd;
    });
    Volume out = dft3_inverse(xh);
    parallel_for(g.count(), [&](std::int64_t idx) {
        out.data[size_t(idx)] = float(double(out.data[size_t(idx)]) +
                                      root * double(mu0_.data[size_t(idx)]));
    });
    return out;
}

}  // namespace invtag
