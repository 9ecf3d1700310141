// invtag: simulate tagged volumetric sequences, run the blind inversion,
// evaluate against ground truth, and aggregate reports.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <ctime>

#include "invtag/error.hpp"
#include "invtag/ivt_io.hpp"
#include "invtag/metrics.hpp"
#include "invtag/parallel.hpp"
#include "invtag/pipeline.hpp"
#include "invtag/png_io.hpp"
#include "invtag/run_config.hpp"
#include "invtag/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace invtag;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitDiverged = 4;

struct CliOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    int threads = 0;
    bool trace = false;
    bool resume = false;
    bool full_chain = false;
    std::string ablate;  // no-psf | no-fading | no-cddp
    std::string prior;   // gmm | gp
    int stop_after_frame = 0;
};

RunConfig load_config(const CliOptions& opt) {
    RunConfig cfg;
    if (!opt.config_path.empty()) cfg = parse_run_config(read_text_file(opt.config_path));
    if (opt.seed) cfg.seed = *opt.seed;
    if (!opt.prior.empty()) {
        check(opt.prior == "gmm" || opt.prior == "gp", "--prior must be gmm or gp");
        cfg.prior.type = opt.prior;
    }
    if (opt.full_chain) cfg.solver.full_chain = true;
    if (!opt.ablate.empty()) {
        if (opt.ablate == "no-psf")
            cfg.solver.ablate_psf = true;
        else if (opt.ablate == "no-fading")
            cfg.solver.ablate_fading = true;
        else if (opt.ablate == "no-cddp")
            cfg.solver.ablate_cddp = true;
        else
            check(false, "--ablate must be one of no-psf, no-fading, no-cddp");
    }
    return cfg;
}

void apply_threads(const CliOptions& opt) {
    int n = opt.threads;
    if (n <= 0) {
        if (const char* env = std::getenv("INVTAG_THREADS")) n = std::atoi(env);
    }
    set_thread_count(n);
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    check(!ec, "cannot create directory '%s'", dir.c_str());
}

std::string frame_file(const std::string& dir, const char* stem, int t, char orient) {
    if (orient)
        return strprintf("%s/%s_t%d_%c.ivt", dir.c_str(), stem, t, orient);
    return strprintf("%s/%s_t%d.ivt", dir.c_str(), stem, t);
}

json params_json(const SolverState& st, const RunConfig& cfg) {
    json j;
    j["seed"] = st.seed;
    j["config_hash"] = config_hash(cfg);
    j["alpha"] = {{"amplitude", st.alpha.amplitude},
                  {"spacing", st.alpha.spacing},
                  {"phase", st.alpha.phase},
                  {"dc", st.alpha.dc}};
    j["gamma"] = {{"perp", st.gamma.perp}, {"par", st.gamma.par}, {"thru", st.gamma.thru}};
    json beta = json::array();
    for (const auto& b : st.beta) beta.push_back({{"scale", b.scale}, {"shift", b.shift}});
    j["beta"] = beta;
    j["flags"] = st.flags;
    j["frames_done"] = st.frames_done;
    if (!st.flags.empty())
        for (const auto& f : st.flags)
            if (f.rfind("ablation", 0) == 0) j["ablation"] = f.substr(10);
    return j;
}

void write_dps_trace_csv(const std::string& path, const SolverState& st) {
    std::string csv = "loop,step,lrec,guidance_norm\n";
    for (const auto& r : st.dps_trace)
        csv += strprintf("%d,%d,%.9g,%.9g\n", int(r[0]), int(r[1]), r[2], r[3]);
    write_text_file(path, csv);
}

void write_trace_csv(const std::string& path, const SolverState& st) {
    std::string csv = "frame,loop,block,loss_before,loss_after,evals,seconds,failed,note\n";
    for (const auto& r : st.history)
        csv += strprintf("%d,%d,%s,%.9g,%.9g,%d,%.3f,%d,%s\n", r.frame, r.loop, r.block.c_str(),
                         r.loss_before, r.loss_after, r.evals, r.seconds, int(r.failed),
                         r.note.c_str());
    write_text_file(path, csv);
}

// ---------------------------------------------------------------------- sim

int cmd_simulate(const CliOptions& opt, const std::string& out_dir) {
    const RunConfig cfg = load_config(opt);
    ensure_dir(out_dir);
    ensure_dir(out_dir + "/truth");

    const SimulatedSequence sim = simulate_run(cfg);
    const int frames = cfg.sequence.frames;

    for (int t = 1; t <= frames; ++t)
        for (auto o : kAllOrientations)
            write_ivt(frame_file(out_dir, "g", t, orientation_letter(o)),
                      sim.g[size_t(t - 1)][size_t(o)]);

    write_ivt(out_dir + "/truth/anatomy.ivt", sim.truth.anatomy);
    for (int t = 1; t <= frames; ++t) {
        write_ivt(frame_file(out_dir + "/truth", "cine", t, 0), sim.truth.cine[size_t(t - 1)]);
        write_ivt(frame_file(out_dir + "/truth", "deform", t, 0),
                  sim.truth.deform[size_t(t - 1)].phi);
    }
    json truth;
    truth["alpha"] = {{"amplitude", sim.truth.alpha.amplitude},
                      {"spacing", sim.truth.alpha.spacing},
                      {"phase", sim.truth.alpha.phase},
                      {"dc", sim.truth.alpha.dc}};
    truth["gamma"] = {{"perp", sim.truth.gamma.perp},
                      {"par", sim.truth.gamma.par},
                      {"thru", sim.truth.gamma.thru}};
    json beta = json::array();
    for (const auto& b : sim.truth.beta) beta.push_back({{"scale", b.scale}, {"shift", b.shift}});
    truth["beta"] = beta;
    truth["noise_sigma"] = sim.truth.noise_sigma;
    truth["fading_model"] = "affine stand-in: scale 1-0.1(t-1), shift 0.05(t-1) by default";
    write_text_file(out_dir + "/truth/params.json", truth.dump(2) + "\n");
    write_text_file(out_dir + "/spec.json", resolved_config_json(cfg));
    std::printf("simulate: wrote %d frames x 3 orientations to %s\n", frames, out_dir.c_str());
    return 0;
}

// -------------------------------------------------------------------- solve

int cmd_solve(const CliOptions& opt, const std::string& data_dir, const std::string& out_dir) {
    const RunConfig cfg = load_config(opt);
    ensure_dir(out_dir);
    ensure_dir(out_dir + "/checkpoint");

    std::vector<std::array<Volume, 3>> g;
    std::uint64_t input_hash = 0xcbf29ce484222325ull;
    for (int t = 1;; ++t) {
        const std::string probe = frame_file(data_dir, "g", t, 'x');
        if (!fs::exists(probe)) break;
        std::array<Volume, 3> frame;
        for (auto o : kAllOrientations) {
            const std::string path = frame_file(data_dir, "g", t, orientation_letter(o));
            frame[size_t(o)] = read_ivt_volume(path);
            input_hash ^= hash_file(path);
        }
        g.push_back(std::move(frame));
    }
    check(!g.empty(), "no measurements found in '%s'", data_dir.c_str());

    auto prior = cfg.solver.ablate_cddp ? nullptr : build_prior(cfg);
    CddpSolver solver(cfg, std::move(g), prior);

    write_text_file(out_dir + "/config.resolved.json", resolved_config_json(cfg));
    if (prior != nullptr && cfg.prior.type == "gmm") {
        const auto* bank = dynamic_cast<const TemplateBankPrior*>(prior.get());
        if (bank) write_ivt_stack(out_dir + "/prior_bank.ivt", bank->templates());
    }

    int start_frame = 1;
    if (opt.resume && fs::exists(out_dir + "/checkpoint/state.json")) {
        load_checkpoint(out_dir + "/checkpoint", solver);
        start_frame = solver.state().frames_done + 1;
        std::printf("solve: resuming after frame %d\n", solver.state().frames_done);
    } else {
        solver.initialize();
    }

    const int T = solver.frames();
    if (cfg.solver.ablate_cddp) {
        solver.run_joint();
    } else {
        for (int t = start_frame; t <= T; ++t) {
            solver.run_frame(t);
            save_checkpoint(out_dir + "/checkpoint", solver);
            if (t == 1) write_ivt(out_dir + "/anatomy.ivt", solver.state().a);
            write_ivt(frame_file(out_dir, "deform", t, 0), solver.frame_deform(t).phi);
            write_ivt(frame_file(out_dir, "cine", t, 0), solver.frame_cine(t));
            write_text_file(out_dir + "/params.json", params_json(solver.state(), cfg).dump(2) + "\n");
            write_trace_csv(out_dir + "/trace.csv", solver.state());
            if (opt.trace) write_dps_trace_csv(out_dir + "/dps_trace.csv", solver.state());
            if (opt.stop_after_frame > 0 && t >= opt.stop_after_frame && t < T) {
                std::printf("solve: stopped after frame %d (resume to continue)\n", t);
                return 0;
            }
        }
    }

    if (cfg.solver.ablate_cddp) {
        write_ivt(out_dir + "/anatomy.ivt", solver.state().a);
        for (int t = 1; t <= T; ++t) {
            write_ivt(frame_file(out_dir, "deform", t, 0), solver.frame_deform(t).phi);
            write_ivt(frame_file(out_dir, "cine", t, 0), solver.frame_cine(t));
        }
        write_text_file(out_dir + "/params.json", params_json(solver.state(), cfg).dump(2) + "\n");
        write_trace_csv(out_dir + "/trace.csv", solver.state());
    }

    // run manifest: self-describing outputs
    json manifest;
    manifest["tool"] = "invtag 1.0";
    manifest["seed"] = cfg.seed;
    manifest["config_hash"] = config_hash(cfg);
    manifest["input_hash"] = input_hash;
    manifest["frames"] = T;
    manifest["threads"] = thread_count();
    manifest["flags"] = solver.state().flags;
    if (cfg.solver.ablate_cddp) manifest["ablation"] = "joint";
    if (cfg.solver.ablate_psf) manifest["ablation"] = "no-psf";
    if (cfg.solver.ablate_fading) manifest["ablation"] = "no-fading";
    write_text_file(out_dir + "/manifest.json", manifest.dump(2) + "\n");

    const double final_loss = solver.frame_loss(1);
    if (!std::isfinite(final_loss)) {
        std::fprintf(stderr, "solve: diverged (non-finite residual); trace at %s/trace.csv\n",
                     out_dir.c_str());
        return kExitDiverged;
    }
    std::printf("solve: done, L_rec^1 = %.6g, outputs in %s\n", final_loss, out_dir.c_str());
    return 0;
}

// ----------------------------------------------------------------- evaluate

json metric_entry(const Volume& ours, const Volume& truth) {
    json j;
    const double p = psnr(ours, truth);
    j["psnr"] = std::isfinite(p) ? json(p) : json("inf");
    j["ssim"] = ssim(ours, truth);
    return j;
}

int cmd_evaluate(const CliOptions& opt, const std::string& truth_dir, const std::string& solve_dir,
                 const std::string& out_dir) {
    const RunConfig cfg = load_config(opt);
    ensure_dir(out_dir);

    const Volume anatomy = read_ivt_volume(truth_dir + "/truth/anatomy.ivt");
    const json truth_params = json::parse(read_text_file(truth_dir + "/truth/params.json"));
    const double true_spacing = truth_params.at("alpha").at("spacing").get<double>();

    json report;
    report["fg_threshold"] = cfg.metrics.fg_threshold;
    report["lowpass_sigma"] = cfg.metrics.lowpass_sigma_factor * true_spacing;
    json frames = json::array();

    const Volume est_anatomy = read_ivt_volume(solve_dir + "/anatomy.ivt");
    check(est_anatomy.grid == anatomy.grid, "evaluate: grid mismatch");
    report["anatomy"] = metric_entry(est_anatomy, anatomy);

    int T = 0;
    while (fs::exists(frame_file(truth_dir + "/truth", "cine", T + 1, 0))) ++T;

    for (int t = 1; t <= T; ++t) {
        const Volume cine_truth = read_ivt_volume(frame_file(truth_dir + "/truth", "cine", t, 0));
        const VectorField phi_truth =
            read_ivt_field(frame_file(truth_dir + "/truth", "deform", t, 0));
        const Volume cine_ours = read_ivt_volume(frame_file(solve_dir, "cine", t, 0));
        const VectorField phi_ours = read_ivt_field(frame_file(solve_dir, "deform", t, 0));
        check(cine_ours.grid == cine_truth.grid, "evaluate: grid mismatch at frame %d", t);

        std::array<Volume, 3> g;
        for (auto o : kAllOrientations)
            g[size_t(o)] = read_ivt_volume(frame_file(truth_dir, "g", t, orientation_letter(o)));

        const Volume lp = lowpass_fuse(g, cfg.metrics.lowpass_sigma_factor * true_spacing);
        const Volume harp = harp_demodulate(g, true_spacing);

        // displacements (phi - id) relative to the shared identity
        const VectorField id = VectorField::identity_map(anatomy.grid);
        VectorField u_est(anatomy.grid), u_gt(anatomy.grid);
        for (int c = 0; c < 3; ++c)
            for (std::int64_t i = 0; i < anatomy.size(); ++i) {
                u_est.comp[size_t(c)][size_t(i)] =
                    phi_ours.comp[size_t(c)][size_t(i)] - id.comp[size_t(c)][size_t(i)];
                u_gt.comp[size_t(c)][size_t(i)] =
                    phi_truth.comp[size_t(c)][size_t(i)] - id.comp[size_t(c)][size_t(i)];
            }
        const auto [epe_mean, epe_p95] = epe(u_est, u_gt, anatomy, cfg.metrics.fg_threshold);

        json f;
        f["t"] = t;
        f["ours"] = metric_entry(cine_ours, cine_truth);
        f["lowpass_fuse"] = metric_entry(lp, cine_truth);
        f["harp_demod"] = metric_entry(harp, cine_truth);
        f["epe_mean"] = epe_mean;
        f["epe_p95"] = epe_p95;
        f["negdet_pct"] = negdet_pct(DeformField{phi_ours, 0});
        frames.push_back(f);

        if (t == 1 || t == T) {
            for (int plane = 0; plane < 3; ++plane) {
                const char* pn = plane == 0 ? "axial" : (plane == 1 ? "coronal" : "sagittal");
                write_slice_png(strprintf("%s/t%d_%s_input.png", out_dir.c_str(), t, pn), g[0],
                                plane);
                write_slice_png(strprintf("%s/t%d_%s_ours.png", out_dir.c_str(), t, pn), cine_ours,
                                plane);
                write_slice_png(strprintf("%s/t%d_%s_lowpass.png", out_dir.c_str(), t, pn), lp,
                                plane);
                write_slice_png(strprintf("%s/t%d_%s_harp.png", out_dir.c_str(), t, pn), harp,
                                plane);
                write_slice_png(strprintf("%s/t%d_%s_truth.png", out_dir.c_str(), t, pn),
                                cine_truth, plane);
                Volume mag_est(anatomy.grid), mag_gt(anatomy.grid);
                for (std::int64_t i = 0; i < anatomy.size(); ++i) {
                    auto m = [&](const VectorField& u) {
                        return float(std::sqrt(double(u.comp[0][size_t(i)]) * u.comp[0][size_t(i)] +
                                               double(u.comp[1][size_t(i)]) * u.comp[1][size_t(i)] +
                                               double(u.comp[2][size_t(i)]) * u.comp[2][size_t(i)]));
                    };
                    mag_est.data[size_t(i)] = m(u_est);
                    mag_gt.data[size_t(i)] = m(u_gt);
                }
                write_slice_png(strprintf("%s/t%d_%s_motion_est.png", out_dir.c_str(), t, pn),
                                mag_est, plane);
                write_slice_png(strprintf("%s/t%d_%s_motion_truth.png", out_dir.c_str(), t, pn),
                                mag_gt, plane);
            }
        }
    }
    report["frames"] = frames;
    write_text_file(out_dir + "/report.json", report.dump(2) + "\n");
    std::printf("evaluate: wrote %s/report.json (%d frames)\n", out_dir.c_str(), T);
    return 0;
}

// ------------------------------------------------------------------- report

struct Agg {
    std::vector<double> v;
    void add(double x) { v.push_back(x); }
    double mean() const {
        double m = 0;
        for (double x : v) m += x;
        return v.empty() ? 0.0 : m / double(v.size());
    }
    double sd() const {
        if (v.size() < 2) return 0.0;
        const double m = mean();
        double s = 0;
        for (double x : v) s += (x - m) * (x - m);
        return std::sqrt(s / double(v.size() - 1));
    }
};

int cmd_report(const std::vector<std::string>& eval_dirs, const std::string& out_dir) {
    ensure_dir(out_dir);
    // rows: method x {t=1, t=T}; columns: psnr, ssim, epe, epe95, negdet
    std::map<std::string, Agg> agg;
    auto add_metrics = [&](const std::string& key, const json& m) {
        if (m.contains("psnr") && m["psnr"].is_number()) agg[key + ".psnr"].add(m["psnr"]);
        if (m.contains("ssim")) agg[key + ".ssim"].add(m["ssim"]);
    };
    for (const auto& dir : eval_dirs) {
        const json r = json::parse(read_text_file(dir + "/report.json"));
        const auto& frames = r.at("frames");
        check(!frames.empty(), "report: '%s' has no frames", dir.c_str());
        const json& first = frames.front();
        const json& last = frames.back();
        for (const char* method : {"ours", "lowpass_fuse", "harp_demod"}) {
            add_metrics(std::string(method) + ".t1", first.at(method));
            add_metrics(std::string(method) + ".tT", last.at(method));
        }
        for (const auto& f : frames) {
            agg["ours.epe_mean"].add(f.at("epe_mean").get<double>());
            agg["ours.epe_p95"].add(f.at("epe_p95").get<double>());
            agg["ours.negdet_pct"].add(f.at("negdet_pct").get<double>());
        }
    }

    std::string csv = "metric,mean,sd,n\n";
    std::string md = "| metric | mean ± sd | n |\n|---|---|---|\n";
    for (const auto& [k, a] : agg) {
        csv += strprintf("%s,%.6g,%.6g,%zu\n", k.c_str(), a.mean(), a.sd(), a.v.size());
        md += strprintf("| %s | %.4g ± %.4g | %zu |\n", k.c_str(), a.mean(), a.sd(), a.v.size());
    }
    write_text_file(out_dir + "/aggregate.csv", csv);
    write_text_file(out_dir + "/aggregate.md", md);
    std::printf("report: aggregated %zu runs into %s\n", eval_dirs.size(), out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"blind inversion of tag-modulated volumetric image sequences"};
    app.require_subcommand(1);

    CliOptions opt;
    app.add_option("--config", opt.config_path, "JSON config file");
    app.add_option("--seed", opt.seed, "override the config seed");
    app.add_option("--threads", opt.threads, "worker threads (default: all, or INVTAG_THREADS)");
    app.add_flag("--trace", opt.trace, "write per-step sampler traces");
    app.add_flag("--resume", opt.resume, "resume a solve from its checkpoint");
    app.add_flag("--full-chain", opt.full_chain, "run every anatomy update from fresh noise");
    app.add_option("--ablate", opt.ablate, "ablation: no-psf | no-fading | no-cddp");
    app.add_option("--prior", opt.prior, "prior family: gmm | gp");
    app.add_option("--stop-after-frame", opt.stop_after_frame,
                   "stop the solve after this frame (for resume testing)");

    std::string out_dir, data_dir, truth_dir, solve_dir;
    std::vector<std::string> eval_dirs;

    auto* sim = app.add_subcommand("simulate", "generate a synthetic tagged sequence");
    sim->add_option("out_dir", out_dir)->required();

    auto* sol = app.add_subcommand("solve", "run the blind inversion");
    sol->add_option("data_dir", data_dir)->required();
    sol->add_option("out_dir", out_dir)->required();

    auto* eva = app.add_subcommand("evaluate", "compare a solve against ground truth");
    eva->add_option("truth_dir", truth_dir)->required();
    eva->add_option("solve_dir", solve_dir)->required();
    eva->add_option("out_dir", out_dir)->required();

    auto* rep = app.add_subcommand("report", "aggregate evaluation reports");
    rep->add_option("eval_dirs", eval_dirs)->required();
    rep->add_option("--out", out_dir)->default_val("report_out");

    CLI11_PARSE(app, argc, argv);
    apply_threads(opt);

    try {
        if (sim->parsed()) return cmd_simulate(opt, out_dir);
        if (sol->parsed()) return cmd_solve(opt, data_dir, out_dir);
        if (eva->parsed()) return cmd_evaluate(opt, truth_dir, solve_dir, out_dir);
        if (rep->parsed()) return cmd_report(eval_dirs, out_dir);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        const std::string what = e.what();
        const bool config_like =
            what.rfind("config", 0) == 0 || what.find("grid mismatch") != std::string::npos ||
            what.rfind("--", 0) == 0;
        return config_like ? kExitConfig : kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    }
    return 0;
}
