#include "invtag/pipeline.hpp"

namespace invtag {

PhantomSpec test_phantom_spec(const RunConfig& cfg) {
    return make_phantom_spec(cfg.grid, cfg.sequence.phantom_inner,
                             Rng(cfg.sequence.data_seed).sub(0x9047));
}

SimulatedSequence simulate_run(const RunConfig& cfg) {
    const Volume phantom = render_phantom(test_phantom_spec(cfg));
    MotionSpec mspec = cfg.sequence.motion;
    mspec.seed = Rng(cfg.sequence.data_seed).sub(0x6d6f74).key;
    const auto motion = make_divergence_free_motion(mspec, cfg.grid, cfg.sequence.frames);

    SequenceSpec seq;
    seq.frames = cfg.sequence.frames;
    seq.alpha = cfg.sequence.tag;
    seq.gamma = cfg.sequence.blur;
    seq.noise_sigma = cfg.sequence.noise_sigma;
    seq.fade_scale = cfg.sequence.fade_scale;
    seq.fade_shift = cfg.sequence.fade_shift;
    return render_sequence(phantom, motion, seq, Rng(cfg.sequence.data_seed).sub(0x6e7a));
}

std::shared_ptr<const ScoreModel> build_prior(const RunConfig& cfg) {
    const PhantomSpec test_spec = test_phantom_spec(cfg);
    Rng bank(cfg.prior.bank_seed);
    const PhantomSpec near = jitter_phantom_spec(test_spec, cfg.prior.near_match_jitter, bank.sub(0));
    if (cfg.prior.type == "gp")
        return std::make_shared<StationaryGPPrior>(render_phantom(near), cfg.prior.lambda,
                                                   cfg.prior.p, cfg.sampler.schedule);
    std::vector<Volume> templates;
    templates.push_back(render_phantom(near));
    for (int k = 1; k < cfg.prior.templates; ++k)
        templates.push_back(render_phantom(
            make_phantom_spec(cfg.grid, cfg.sequence.phantom_inner, bank.sub(std::uint64_t(k)))));
    return std::make_shared<TemplateBankPrior>(std::move(templates), cfg.prior.sigma_p,
                                               cfg.sampler.schedule);
}

}  // namespace invtag
