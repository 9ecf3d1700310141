#pragma once

#include <memory>
#include <vector>

#include "invtag/dft.hpp"
#include "invtag/grid.hpp"
#include "invtag/rng.hpp"

namespace invtag {

/// Variance-preserving discrete noise schedule. The classic 1e-4..2e-2 linear
/// beta ramp is the N=1000 convention; rescaling by 1000/N keeps the
/// cumulative schedule (and kappa_bar_N) independent of the step count.
struct NoiseSchedule {
    int N = 0;
    std::vector<double> beta;       // beta[i-1] is the rate of step i
    std::vector<double> kappa_bar;  // kappa_bar[i], i in [0, N]; [0] = 1

    static NoiseSchedule linear(int N);

    double kbar(int i) const { return kappa_bar[size_t(i)]; }
    void validate() const;
};

/// Marginal score of the prior at discrete noise level i, plus the exact
/// Jacobian-vector product needed to backpropagate through Tweedie's formula.
class ScoreModel {
  public:
    virtual ~ScoreModel() = default;
    virtual Volume score(const Volume& a, int i) const = 0;
    virtual Volume jvp(const Volume& a, int i, const Volume& w) const = 0;
    /// Draw from the step-i marginal (test/diagnostic use).
    virtual Volume sample_marginal(int i, Rng rng) const = 0;
    virtual GridSpec grid() const = 0;

    const NoiseSchedule& schedule() const { return sched_; }

  protected:
    explicit ScoreModel(NoiseSchedule s) : sched_(std::move(s)) {}
    NoiseSchedule sched_;
};

/// Finite mixture of template volumes with isotropic component noise:
/// marginal at step i is sum_k w_k N(sqrt(kbar) mu_k, (kbar sigma_p^2 + 1 -
/// kbar) I). Scores are computed in the log domain (no responsibility
/// underflow).
class TemplateBankPrior : public ScoreModel {
  public:
    TemplateBankPrior(std::vector<Volume> templates, double sigma_p, NoiseSchedule sched);

    Volume score(const Volume& a, int i) const override;
    Volume jvp(const Volume& a, int i, const Volume& w) const override;
    Volume sample_marginal(int i, Rng rng) const override;
    GridSpec grid() const override { return mu_[0].grid; }

    /// Softmax responsibilities of a at step i (sums to 1).
    std::vector<double> responsibilities(const Volume& a, int i) const;

    /// log marginal density up to the additive normalization constant.
    double log_density_unnormalized(const Volume& a, int i) const;

    const std::vector<Volume>& templates() const { return mu_; }
    double sigma_p() const { return sigma_p_; }

  private:
    std::vector<Volume> mu_;
    double sigma_p_;
};

/// Stationary Gaussian prior diagonalized by the DFT, with spectral density
/// S(f) = (1 + lambda |f|^2)^(-p); f in cycles/voxel. An analytic oracle for
/// the sampler: every score is a closed-form per-frequency multiplication.
class StationaryGPPrior : public ScoreModel {
  public:
    StationaryGPPrior(Volume mean, double lambda, double p, NoiseSchedule sched);

    Volume score(const Volume& a, int i) const override;
    Volume jvp(const Volume& a, int i, const Volume& w) const override;
    Volume sample_marginal(int i, Rng rng) const override;
    GridSpec grid() const override { return mu0_.grid; }

    const Volume& mean() const { return mu0_; }
    const std::vector<double>& spectrum() const { return S_; }
    double log_density_unnormalized(const Volume& a, int i) const;

  private:
    Volume mu0_;
    ComplexVolume mu0_hat_;
    std::vector<double> S_;  // per DFT bin
};

}  // namespace invtag
