#include "invtag/solver.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>

#include "invtag/conv.hpp"
#include "invtag/error.hpp"
#include "invtag/interp.hpp"
#include "invtag/ivt_io.hpp"
#include "invtag/parallel.hpp"

namespace invtag {

namespace {

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

// Stage tags for the stateless RNG streams: draws depend only on
// (seed, frame, loop, block), never on execution history, so resumed runs
// replay identically.
std::uint64_t stream_tag(int frame, int loop, std::uint64_t block) {
    return (std::uint64_t(frame) << 40) ^ (std::uint64_t(loop) << 32) ^ block;
}

constexpr std::uint64_t kBlockPsf = 1, kBlockTag = 2, kBlockAnatomy = 3, kBlockMotion = 4,
                        kBlockFade = 5, kBlockInitNet = 6, kBlockJoint = 7;

}  // namespace

CddpSolver::CddpSolver(const RunConfig& cfg, std::vector<std::array<Volume, 3>> measurements,
                       std::shared_ptr<const ScoreModel> prior)
    : cfg_(cfg), g_(std::move(measurements)), prior_(std::move(prior)) {
    check(!g_.empty(), "solver: no measurements");
    for (const auto& frame : g_)
        for (const auto& vol : frame)
            check(vol.grid == g_[0][0].grid, "solver: measurement grids differ");
    check(prior_ == nullptr || prior_->grid() == g_[0][0].grid,
          "solver: prior grid does not match the measurements");
    state_.seed = cfg_.seed;
}

void CddpSolver::guard_not_frozen(const char* what) const {
    check(!state_.frozen, "attempt to modify %s after the first-frame freeze", what);
}

double CddpSolver::frame_loss_with(int t, const TagParams& alpha, const PsfParams& gamma,
                                   const FadingParams& beta, const VectorField& phi) const {
    FrameOperator op{alpha, gamma, beta, &phi};
    return residual_loss(state_.a, op, g_[size_t(t - 1)]);
}

VectorField CddpSolver::frame_velocity(int t) const {
    if (cfg_.solver.motion.param == "grid") return state_.velocity[size_t(t - 1)];
    return eval_velocity(state_.theta[size_t(t - 1)], g_[0][0].grid);
}

DeformField CddpSolver::frame_deform(int t) const {
    return exp_velocity(frame_velocity(t), cfg_.solver.exp_steps);
}

Volume CddpSolver::frame_cine(int t) const { return pullback(state_.a, frame_deform(t).phi); }

double CddpSolver::frame_loss(int t) const {
    return frame_loss_with(t, state_.alpha, state_.gamma, state_.beta[size_t(t - 1)],
                           frame_deform(t).phi);
}

void CddpSolver::initialize() {
    const GridSpec grid = g_[0][0].grid;
    const int T = frames();

    // a <- lowpass(avg(g_1)); the cutoff suppresses the nominal tag frequency.
    Volume avg(grid);
    parallel_for(grid.count(), [&](std::int64_t i) {
        avg.data[size_t(i)] =
            float((double(g_[0][0].data[size_t(i)]) + double(g_[0][1].data[size_t(i)]) +
                   double(g_[0][2].data[size_t(i)])) /
                  3.0);
    });
    const double sigma_init =
        cfg_.solver.sigma_init_factor * cfg_.solver.nominal_spacing / (2.0 * M_PI);
    state_.a = conv_gaussian(avg, sigma_init, sigma_init, sigma_init);

    // q <- 1 expressed through the tag parameters; fading identity; no blur.
    state_.alpha = TagParams{0.0, cfg_.solver.nominal_spacing, 0.0, 1.0};
    state_.gamma = PsfParams{0.0, 0.0, 0.0};
    state_.beta.assign(size_t(T), FadingParams{1.0, 0.0});

    MotionNetSpec mspec;
    mspec.hidden = cfg_.solver.motion.hidden;
    mspec.velocity_scale = cfg_.solver.motion.velocity_scale;
    state_.theta.clear();
    state_.velocity.clear();
    for (int t = 0; t < T; ++t) {
        state_.theta.push_back(
            MotionNet::init(mspec, Rng(cfg_.seed).sub(stream_tag(t + 1, 0, kBlockInitNet))));
        state_.velocity.push_back(VectorField(grid));
    }
    state_.stage = SolverStage::Frame1Loop;
    state_.frames_done = 0;
    state_.frozen = false;
}

void CddpSolver::run_motion_block(int t, int loop, int steps) {
    const GridSpec grid = g_[0][0].grid;
    const double t0 = now_seconds();

    MotionProblem prob;
    prob.a = &state_.a;
    prob.alpha = state_.alpha;
    prob.gamma = state_.gamma;
    prob.beta = state_.beta[size_t(t - 1)];
    prob.g = {&g_[size_t(t - 1)][0], &g_[size_t(t - 1)][1], &g_[size_t(t - 1)][2]};
    prob.exp_steps = cfg_.solver.exp_steps;
    PreparedMotionLoss loss(prob);

    AdamConfig acfg = cfg_.adam;
    acfg.steps = steps;

    BlockRecord rec{t, loop, "motion", 0.0, 0.0, 0, 0.0, false, ""};
    try {
        if (cfg_.solver.motion.param == "grid") {
            VectorField& v = state_.velocity[size_t(t - 1)];
            rec.loss_before = loss.loss_and_velocity_grad(v, nullptr);
            std::vector<double> flat;
            flat.reserve(size_t(3 * grid.count()));
            for (const auto& c : v.comp)
                for (float x : c) flat.push_back(double(x));
            auto res = adam_minimize(
                [&](std::span<const double> th, std::vector<double>& grad) {
                    VectorField vv(grid);
                    size_t off = 0;
                    for (auto& c : vv.comp)
                        for (auto& x : c) x = float(th[off++]);
                    VectorField gv;
                    const double l = loss.loss_and_velocity_grad(vv, &gv);
                    grad.clear();
                    grad.reserve(th.size());
                    for (const auto& c : gv.comp)
                        for (float x : c) grad.push_back(double(x));
                    return l;
                },
                std::move(flat), acfg);
            size_t off = 0;
            for (auto& c : v.comp)
                for (auto& x : c) x = float(res.x[off++]);
            rec.loss_after = res.fx;
            rec.evals = res.steps_run;
        } else {
            MotionNet& net = state_.theta[size_t(t - 1)];
            MotionNet work = net;
            auto res = adam_minimize(
                [&](std::span<const double> th, std::vector<double>& grad) {
                    work.unflatten(th);
                    auto r = motion_loss_grad(work, grid, loss);
                    grad = std::move(r.grad);
                    return r.loss;
                },
                net.flatten(), acfg);
            rec.loss_before = res.trace.empty() ? 0.0 : res.trace.front();
            net.unflatten(res.x);
            rec.loss_after = res.fx;
            rec.evals = res.steps_run;
        }
    } catch (const Error& e) {
        rec.failed = true;
        rec.note = e.what();
        state_.flags.push_back(strprintf("motion block failed (t=%d l=%d): %s", t, loop, e.what()));
    }
    rec.seconds = now_seconds() - t0;
    state_.history.push_back(rec);
}

void CddpSolver::run_frame(int t) {
    check(t >= 1 && t <= frames(), "run_frame: bad frame %d", t);
    const GridSpec grid = g_[0][0].grid;
    const int L = cfg_.solver.loops;
    const int refine =
        cfg_.solver.refine_adam_steps > 0 ? cfg_.solver.refine_adam_steps : cfg_.adam.steps;

    if (t == 1) {
        check(!state_.frozen, "frame 1 already solved");
        state_.stage = SolverStage::Frame1Loop;

        for (int l = 1; l <= L; ++l) {
            const VectorField phi1 = frame_deform(1).phi;

            // ---- PSF block (DE over gamma in [0, psf_max]^3)
            if (!cfg_.solver.ablate_psf) {
                const double t0 = now_seconds();
                // the warp does not involve gamma: precompute per orientation
                std::array<Volume, 3> warped;
                for (auto o : kAllOrientations) {
                    Volume m = apply_fading(base_tag(grid, o, state_.alpha),
                                            state_.beta[0]);
                    parallel_for(grid.count(), [&](std::int64_t i) {
                        m.data[size_t(i)] =
                            float(double(m.data[size_t(i)]) * double(state_.a.data[size_t(i)]));
                    });
                    warped[size_t(o)] = pullback(m, phi1);
                }
                auto objective = [&](std::span<const double> x) {
                    const PsfParams cand{x[0], x[1], x[2]};
                    double L1 = 0.0;
                    for (auto o : kAllOrientations) {
                        const auto s = psf_axis_sigmas(o, cand);
                        const Volume out = conv_gaussian(warped[size_t(o)], s[0], s[1], s[2]);
                        L1 += block_sum(grid.count(), [&](std::int64_t i) {
                            const double d = double(out.data[size_t(i)]) -
                                             double(g_[0][size_t(o)].data[size_t(i)]);
                            return d * d;
                        });
                    }
                    return L1;
                };
                const double before = frame_loss(1);
                DeConfig dcfg = cfg_.de;
                dcfg.seed = Rng(cfg_.seed).sub(stream_tag(1, l, kBlockPsf)).key;
                const std::vector<std::pair<double, double>> bounds(
                    3, {0.0, cfg_.solver.bounds.psf_max});
                const std::vector<double> incumbent = {state_.gamma.perp, state_.gamma.par,
                                                       state_.gamma.thru};
                auto res = de_minimize(objective, bounds, incumbent, dcfg);
                BlockRecord rec{1, l, "psf", before, res.fx, res.evals, now_seconds() - t0, false, ""};
                if (res.fx <= before) {
                    state_.gamma = PsfParams{res.x[0], res.x[1], res.x[2]};
                } else {
                    rec.note = "kept incumbent";
                }
                state_.history.push_back(rec);
            }

            // ---- Tag block (DE over alpha)
            {
                const double t0 = now_seconds();
                const ParamBounds& b = cfg_.solver.bounds;
                const double nominal = cfg_.solver.nominal_spacing;
                auto objective = [&](std::span<const double> x) {
                    const TagParams cand{x[0], x[1], x[2], x[3]};
                    return frame_loss_with(1, cand, state_.gamma, state_.beta[0], phi1);
                };
                const double before = frame_loss(1);
                DeConfig dcfg = cfg_.de;
                dcfg.seed = Rng(cfg_.seed).sub(stream_tag(1, l, kBlockTag)).key;
                const std::vector<std::pair<double, double>> bounds = {
                    {b.amp_lo, b.amp_hi},
                    {b.spacing_rel_lo * nominal, b.spacing_rel_hi * nominal},
                    {-M_PI, M_PI},
                    {b.dc_lo, b.dc_hi}};
                const std::vector<double> incumbent = {state_.alpha.amplitude, state_.alpha.spacing,
                                                       state_.alpha.phase, state_.alpha.dc};
                auto res = de_minimize(objective, bounds, incumbent, dcfg);
                BlockRecord rec{1, l, "tag", before, res.fx, res.evals, now_seconds() - t0, false, ""};
                if (res.fx <= before) {
                    state_.alpha = TagParams{res.x[0], res.x[1], res.x[2], res.x[3]};
                } else {
                    rec.note = "kept incumbent";
                }
                state_.history.push_back(rec);
            }

            // ---- Anatomy block (diffusion posterior sampling)
            if (prior_ != nullptr) {
                const double t0 = now_seconds();
                LinearForward A(grid, state_.alpha, state_.gamma, state_.beta[0], &phi1);
                SamplerConfig scfg = cfg_.sampler;
                const double before = frame_loss(1);
                Rng chain = Rng(cfg_.seed).sub(stream_tag(1, l, kBlockAnatomy));
                DpsResult res;
                if (l == 1 || cfg_.solver.full_chain) {
                    res = dps_sample(std::nullopt, -1, g_[0], &A, *prior_, scfg, chain);
                } else {
                    const int warm = std::max(1, int(std::lround(cfg_.solver.warm_frac *
                                                                 scfg.schedule.N)));
                    res = dps_sample(state_.a, warm, g_[0], &A, *prior_, scfg, chain);
                }
                BlockRecord rec{1, l, "anatomy", before, 0.0, int(res.trace.size()),
                                now_seconds() - t0, false, ""};
                if (res.diverged) {
                    rec.failed = true;
                    rec.note = res.note;
                    state_.flags.push_back(strprintf("anatomy block diverged (l=%d): %s", l,
                                                     res.note.c_str()));
                    rec.loss_after = before;
                } else {
                    state_.a = std::move(res.a0);
                    rec.loss_after = frame_loss(1);
                }
                for (const auto& row : res.trace)
                    state_.dps_trace.push_back(
                        {double(l), double(row.step), row.lrec, row.guidance_norm});
                state_.history.push_back(rec);
            }

            // ---- Motion block
            run_motion_block(1, l, l == 1 ? cfg_.adam.steps : refine);
        }

        state_.frozen = true;
        state_.frames_done = 1;
        state_.stage = frames() > 1 ? SolverStage::FrameT : SolverStage::Done;
        return;
    }

    // ---- frames t >= 2: fading + motion with warm-started motion state
    check(state_.frozen, "frame %d requested before frame 1 finished", t);
    check(state_.frames_done == t - 1, "frame %d requested out of order", t);

    if (cfg_.solver.warm_start_motion) {
        if (cfg_.solver.motion.param == "grid")
            state_.velocity[size_t(t - 1)] = state_.velocity[size_t(t - 2)];
        else
            state_.theta[size_t(t - 1)] = state_.theta[size_t(t - 2)];
    }

    const int refine_steps = refine;
    for (int l = 1; l <= L; ++l) {
        if (!cfg_.solver.ablate_fading) {
            const double t0 = now_seconds();
            const VectorField phi = frame_deform(t).phi;
            auto objective = [&](std::span<const double> x) {
                return frame_loss_with(t, state_.alpha, state_.gamma, FadingParams{x[0], x[1]},
                                       phi);
            };
            const double before = frame_loss(t);
            DeConfig dcfg = cfg_.de;
            dcfg.seed = Rng(cfg_.seed).sub(stream_tag(t, l, kBlockFade)).key;
            const ParamBounds& b = cfg_.solver.bounds;
            const std::vector<std::pair<double, double>> bounds(2, {b.fade_lo, b.fade_hi});
            const std::vector<double> incumbent = {state_.beta[size_t(t - 1)].scale,
                                                   state_.beta[size_t(t - 1)].shift};
            auto res = de_minimize(objective, bounds, incumbent, dcfg);
            BlockRecord rec{t, l, "fading", before, res.fx, res.evals, now_seconds() - t0, false, ""};
            if (res.fx <= before) {
                state_.beta[size_t(t - 1)] = FadingParams{res.x[0], res.x[1]};
            } else {
                rec.note = "kept incumbent";
            }
            state_.history.push_back(rec);
        }
        run_motion_block(t, l, l == 1 ? cfg_.adam.steps : refine_steps);
    }
    state_.frames_done = t;
    if (t == frames()) state_.stage = SolverStage::Done;
}

void CddpSolver::run_joint() {
    // Table-4 row C: everything at once with Adam, no DE, no diffusion loop.
    check(cfg_.solver.motion.param == "mlp", "joint ablation supports the mlp parametrization");
    const GridSpec grid = g_[0][0].grid;
    const int T = frames();
    initialize();
    state_.flags.push_back("ablation: joint");
    // start from a mid-box guess instead of the degenerate q == 1 encoding
    state_.alpha = TagParams{0.75, cfg_.solver.nominal_spacing, 0.0, 0.25};
    state_.gamma = PsfParams{0.5, 0.5, 0.5};

    const std::int64_t nvox = grid.count();
    const size_t theta_len = state_.theta[0].param_count();
    const size_t len_a = size_t(nvox);
    const size_t off_alpha = len_a, off_gamma = off_alpha + 4, off_beta = off_gamma + 3;
    const size_t off_theta = off_beta + 2 * size_t(T);
    std::vector<double> flat(off_theta + theta_len * size_t(T));

    for (std::int64_t i = 0; i < nvox; ++i) flat[size_t(i)] = double(state_.a.data[size_t(i)]);
    flat[off_alpha + 0] = state_.alpha.amplitude;
    flat[off_alpha + 1] = state_.alpha.spacing;
    flat[off_alpha + 2] = state_.alpha.phase;
    flat[off_alpha + 3] = state_.alpha.dc;
    flat[off_gamma + 0] = state_.gamma.perp;
    flat[off_gamma + 1] = state_.gamma.par;
    flat[off_gamma + 2] = state_.gamma.thru;
    for (int t = 0; t < T; ++t) {
        flat[off_beta + 2 * size_t(t)] = state_.beta[size_t(t)].scale;
        flat[off_beta + 2 * size_t(t) + 1] = state_.beta[size_t(t)].shift;
        const auto th = state_.theta[size_t(t)].flatten();
        std::copy(th.begin(), th.end(), flat.begin() + long(off_theta + theta_len * size_t(t)));
    }

    auto unpack = [&](std::span<const double> x) {
        // clamps keep the physical parameters evaluable (sigma >= 0 etc.)
        for (std::int64_t i = 0; i < nvox; ++i) state_.a.data[size_t(i)] = float(x[size_t(i)]);
        state_.alpha = TagParams{x[off_alpha], std::max(x[off_alpha + 1], 1.0), x[off_alpha + 2],
                                 x[off_alpha + 3]};
        state_.gamma = PsfParams{std::clamp(x[off_gamma], 0.0, cfg_.solver.bounds.psf_max),
                                 std::clamp(x[off_gamma + 1], 0.0, cfg_.solver.bounds.psf_max),
                                 std::clamp(x[off_gamma + 2], 0.0, cfg_.solver.bounds.psf_max)};
        for (int t = 0; t < T; ++t) {
            state_.beta[size_t(t)] =
                FadingParams{x[off_beta + 2 * size_t(t)], x[off_beta + 2 * size_t(t) + 1]};
            state_.theta[size_t(t)].unflatten(
                x.subspan(off_theta + theta_len * size_t(t), theta_len));
        }
    };

    auto total_loss = [&]() {
        double L = 0.0;
        for (int t = 1; t <= T; ++t) L += frame_loss(t);
        return L;
    };

    const double t0 = now_seconds();
    const double before = [&] {
        unpack(flat);
        return total_loss();
    }();

    AdamConfig acfg = cfg_.adam;
    acfg.steps = cfg_.solver.joint_steps;
    acfg.lr = cfg_.solver.joint_lr;

    auto grad_fn = [&](std::span<const double> x, std::vector<double>& grad) {
        unpack(x);
        grad.assign(x.size(), 0.0);
        double L = 0.0;
        for (int t = 1; t <= T; ++t) {
            const VectorField v = frame_velocity(t);
            const DeformField phi = exp_velocity(v, cfg_.solver.exp_steps);

            // anatomy gradient via the linear-operator adjoint
            LinearForward A(grid, state_.alpha, state_.gamma, state_.beta[size_t(t - 1)], &phi.phi);
            Volume ga;
            L += A.loss_and_grad(state_.a, g_[size_t(t - 1)], &ga);
            for (std::int64_t i = 0; i < nvox; ++i) grad[size_t(i)] += double(ga.data[size_t(i)]);

            // motion gradient via reverse mode
            MotionProblem prob;
            prob.a = &state_.a;
            prob.alpha = state_.alpha;
            prob.gamma = state_.gamma;
            prob.beta = state_.beta[size_t(t - 1)];
            prob.g = {&g_[size_t(t - 1)][0], &g_[size_t(t - 1)][1], &g_[size_t(t - 1)][2]};
            prob.exp_steps = cfg_.solver.exp_steps;
            PreparedMotionLoss ml(prob);
            auto mg = motion_loss_grad(state_.theta[size_t(t - 1)], grid, ml);
            for (size_t i = 0; i < theta_len; ++i)
                grad[off_theta + theta_len * size_t(t - 1) + i] = mg.grad[i];

            // fading gradient by central differences (frame-local)
            for (int c = 0; c < 2; ++c) {
                const double h = 1e-3;
                FadingParams bp = state_.beta[size_t(t - 1)], bm = bp;
                (c == 0 ? bp.scale : bp.shift) += h;
                (c == 0 ? bm.scale : bm.shift) -= h;
                const double lp = frame_loss_with(t, state_.alpha, state_.gamma, bp, phi.phi);
                const double lm = frame_loss_with(t, state_.alpha, state_.gamma, bm, phi.phi);
                grad[off_beta + 2 * size_t(t - 1) + size_t(c)] = (lp - lm) / (2 * h);
            }
        }
        // alpha and gamma act on every frame: central differences on the total
        auto tag_component = [](TagParams& p, int c) -> double& {
            switch (c) {
                case 0: return p.amplitude;
                case 1: return p.spacing;
                case 2: return p.phase;
                default: return p.dc;
            }
        };
        auto psf_component = [](PsfParams& p, int c) -> double& {
            switch (c) {
                case 0: return p.perp;
                case 1: return p.par;
                default: return p.thru;
            }
        };
        std::vector<DeformField> phis;
        for (int t = 1; t <= T; ++t) phis.push_back(frame_deform(t));
        for (int c = 0; c < 4; ++c) {
            const double h = c == 1 ? 1e-2 : 1e-3;  // spacing moves in voxels
            TagParams ap = state_.alpha, am = ap;
            tag_component(ap, c) += h;
            tag_component(am, c) -= h;
            double lp = 0.0, lm = 0.0;
            for (int t = 1; t <= T; ++t) {
                lp += frame_loss_with(t, ap, state_.gamma, state_.beta[size_t(t - 1)],
                                      phis[size_t(t - 1)].phi);
                lm += frame_loss_with(t, am, state_.gamma, state_.beta[size_t(t - 1)],
                                      phis[size_t(t - 1)].phi);
            }
            grad[off_alpha + size_t(c)] = (lp - lm) / (2 * h);
        }
        for (int c = 0; c < 3; ++c) {
            const double h = 1e-3;
            PsfParams gp = state_.gamma, gm = gp;
            psf_component(gp, c) = std::max(0.0, psf_component(gp, c) + h);
            psf_component(gm, c) = std::max(0.0, psf_component(gm, c) - h);
            const double denom = psf_component(gp, c) - psf_component(gm, c);
            if (denom <= 0.0) {
                grad[off_gamma + size_t(c)] = 0.0;
                continue;
            }
            double lp = 0.0, lm = 0.0;
            for (int t = 1; t <= T; ++t) {
                lp += frame_loss_with(t, state_.alpha, gp, state_.beta[size_t(t - 1)],
                                      phis[size_t(t - 1)].phi);
                lm += frame_loss_with(t, state_.alpha, gm, state_.beta[size_t(t - 1)],
                                      phis[size_t(t - 1)].phi);
            }
            grad[off_gamma + size_t(c)] = (lp - lm) / denom;
        }
        return L;
    };

    auto res = adam_minimize(grad_fn, std::move(flat), acfg);
    unpack(res.x);
    state_.history.push_back(BlockRecord{0, 0, "joint", before, res.fx, res.steps_run,
                                         now_seconds() - t0, false, ""});
    state_.frozen = true;
    state_.frames_done = T;
    state_.stage = SolverStage::Done;
}

// ---------------------------------------------------------------------------

using nlohmann::json;

void save_checkpoint(const std::string& dir, const CddpSolver& solver) {
    const SolverState& st = solver.state();
    json j;
    j["config_hash"] = config_hash(solver.config());
    j["seed"] = st.seed;
    j["frames_done"] = st.frames_done;
    j["frozen"] = st.frozen;
    j["stage"] = int(st.stage);
    j["alpha"] = {st.alpha.amplitude, st.alpha.spacing, st.alpha.phase, st.alpha.dc};
    j["gamma"] = {st.gamma.perp, st.gamma.par, st.gamma.thru};
    json beta = json::array();
    for (const auto& b : st.beta) beta.push_back({b.scale, b.shift});
    j["beta"] = beta;
    j["flags"] = st.flags;
    json hist = json::array();
    for (const auto& r : st.history)
        hist.push_back({{"frame", r.frame},
                        {"loop", r.loop},
                        {"block", r.block},
                        {"loss_before", r.loss_before},
                        {"loss_after", r.loss_after},
                        {"evals", r.evals},
                        {"seconds", r.seconds},
                        {"failed", r.failed},
                        {"note", r.note}});
    j["history"] = hist;
    write_text_file(dir + "/state.json", j.dump(2) + "\n");
    write_ivt(dir + "/a.ivt", st.a);
    for (size_t t = 0; t < st.theta.size(); ++t)
        write_ivtw(strprintf("%s/theta_t%zu.ivtw", dir.c_str(), t + 1), st.theta[t].to_blob());
    if (solver.config().solver.motion.param == "grid")
        for (size_t t = 0; t < st.velocity.size(); ++t)
            write_ivt(strprintf("%s/velocity_t%zu.ivt", dir.c_str(), t + 1), st.velocity[t]);
}

void load_checkpoint(const std::string& dir, CddpSolver& solver) {
    const json j = json::parse(read_text_file(dir + "/state.json"));
    check(j.at("config_hash").get<std::uint64_t>() == config_hash(solver.config()),
          "checkpoint config does not match the current configuration");
    solver.initialize();  // allocate state containers deterministically
    SolverState& st = solver.mutable_state();
    st.seed = j.at("seed").get<std::uint64_t>();
    st.frames_done = j.at("frames_done").get<int>();
    st.frozen = j.at("frozen").get<bool>();
    st.stage = SolverStage(j.at("stage").get<int>());
    const auto& al = j.at("alpha");
    st.alpha = TagParams{al[0].get<double>(), al[1].get<double>(), al[2].get<double>(),
                         al[3].get<double>()};
    const auto& ga = j.at("gamma");
    st.gamma = PsfParams{ga[0].get<double>(), ga[1].get<double>(), ga[2].get<double>()};
    const auto& be = j.at("beta");
    for (size_t t = 0; t < st.beta.size() && t < be.size(); ++t)
        st.beta[t] = FadingParams{be[t][0].get<double>(), be[t][1].get<double>()};
    st.flags = j.at("flags").get<std::vector<std::string>>();
    st.history.clear();
    for (const auto& r : j.at("history"))
        st.history.push_back(BlockRecord{r.at("frame").get<int>(), r.at("loop").get<int>(),
                                         r.at("block").get<std::string>(),
                                         r.at("loss_before").get<double>(),
                                         r.at("loss_after").get<double>(),
                                         r.at("evals").get<int>(), r.at("seconds").get<double>(),
                                         r.at("failed").get<bool>(),
                                         r.at("note").get<std::string>()});
    st.a = read_ivt_volume(dir + "/a.ivt");
    const double s_v = solver.config().solver.motion.velocity_scale;
    for (size_t t = 0; t < st.theta.size(); ++t)
        st.theta[t] = MotionNet::from_blob(
            read_ivtw(strprintf("%s/theta_t%zu.ivtw", dir.c_str(), t + 1)), s_v);
    if (solver.config().solver.motion.param == "grid")
        for (size_t t = 0; t < st.velocity.size(); ++t)
            st.velocity[t] = read_ivt_field(strprintf("%s/velocity_t%zu.ivt", dir.c_str(), t + 1));
}

}  // namespace invtag
