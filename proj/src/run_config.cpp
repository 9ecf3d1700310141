#include "invtag/run_config.hpp"

#include <json.hpp>

#include "invtag/error.hpp"
#include "invtag/ivt_io.hpp"

namespace invtag {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& path) {
    check(j.is_object(), "config: expected an object at %s", path.c_str());
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        check(ok, "config: unknown key '%s' at %s", it.key().c_str(), path.c_str());
    }
}

template <typename T>
void get_to(const json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

void parse_blur(const json& j, PsfParams& blur, double& noise) {
    if (j.is_string()) {
        const std::string p = j.get<std::string>();
        if (p == "iso") {
            blur = {1.0, 1.0, 1.0};
        } else if (p == "aniso-thru") {
            blur = {0.4, 0.4, 4.0};
        } else if (p == "aniso") {
            blur = {0.4, 1.0, 3.0};
        } else if (p == "aniso-noise") {
            blur = {0.4, 1.0, 3.0};
            noise = 0.01;
        } else {
            check(false, "config: unknown blur preset '%s'", p.c_str());
        }
    } else {
        reject_unknown(j, {"perp", "par", "thru"}, "sequence.blur");
        get_to(j, "perp", blur.perp);
        get_to(j, "par", blur.par);
        get_to(j, "thru", blur.thru);
    }
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(strprintf("config: %s", e.what()));
    }

    RunConfig cfg;
    reject_unknown(j, {"grid", "seed", "sequence", "prior", "sampler", "de", "adam", "solver",
                       "metrics"},
                   "$");

    if (j.contains("grid")) {
        const json& g = j["grid"];
        reject_unknown(g, {"nx", "ny", "nz"}, "grid");
        get_to(g, "nx", cfg.grid.nx);
        get_to(g, "ny", cfg.grid.ny);
        get_to(g, "nz", cfg.grid.nz);
    }
    cfg.grid.validate();
    get_to(j, "seed", cfg.seed);

    if (j.contains("sequence")) {
        const json& s = j["sequence"];
        reject_unknown(s,
                       {"frames", "data_seed", "tag", "blur", "noise_sigma", "fading", "motion",
                        "phantom"},
                       "sequence");
        get_to(s, "frames", cfg.sequence.frames);
        get_to(s, "data_seed", cfg.sequence.data_seed);
        check(cfg.sequence.frames >= 1, "config: sequence.frames must be >= 1");
        if (s.contains("tag")) {
            const json& t = s["tag"];
            reject_unknown(t, {"amplitude", "spacing", "phase", "dc"}, "sequence.tag");
            get_to(t, "amplitude", cfg.sequence.tag.amplitude);
            get_to(t, "spacing", cfg.sequence.tag.spacing);
            get_to(t, "phase", cfg.sequence.tag.phase);
            get_to(t, "dc", cfg.sequence.tag.dc);
        }
        if (s.contains("blur")) parse_blur(s["blur"], cfg.sequence.blur, cfg.sequence.noise_sigma);
        get_to(s, "noise_sigma", cfg.sequence.noise_sigma);
        if (s.contains("fading")) {
            const json& f = s["fading"];
            reject_unknown(f, {"scale_step", "shift_step"}, "sequence.fading");
            get_to(f, "scale_step", cfg.sequence.fade_scale);
            get_to(f, "shift_step", cfg.sequence.fade_shift);
        }
        if (s.contains("motion")) {
            const json& m = s["motion"];
            reject_unknown(m, {"amplitude", "smoothness", "rk4_steps"}, "sequence.motion");
            get_to(m, "amplitude", cfg.sequence.motion.amplitude);
            get_to(m, "smoothness", cfg.sequence.motion.smoothness);
            get_to(m, "rk4_steps", cfg.sequence.motion.rk4_steps);
        }
        if (s.contains("phantom")) {
            const json& p = s["phantom"];
            reject_unknown(p, {"inner"}, "sequence.phantom");
            get_to(p, "inner", cfg.sequence.phantom_inner);
        }
    }

    if (j.contains("prior")) {
        const json& p = j["prior"];
        reject_unknown(p, {"type", "templates", "sigma_p", "lambda", "p", "bank_seed",
                           "near_match_jitter"},
                       "prior");
        get_to(p, "type", cfg.prior.type);
        check(cfg.prior.type == "gmm" || cfg.prior.type == "gp", "config: prior.type must be gmm or gp");
        get_to(p, "templates", cfg.prior.templates);
        get_to(p, "sigma_p", cfg.prior.sigma_p);
        get_to(p, "lambda", cfg.prior.lambda);
        get_to(p, "p", cfg.prior.p);
        get_to(p, "bank_seed", cfg.prior.bank_seed);
        get_to(p, "near_match_jitter", cfg.prior.near_match_jitter);
    }

    if (j.contains("sampler")) {
        const json& s = j["sampler"];
        reject_unknown(s, {"steps", "rho_star", "ddim_eta", "jvp", "rho_cap"}, "sampler");
        get_to(s, "steps", cfg.sampler_steps);
        get_to(s, "rho_star", cfg.sampler.rho_star);
        get_to(s, "ddim_eta", cfg.sampler.ddim_eta);
        get_to(s, "rho_cap", cfg.sampler.rho_cap);
        if (s.contains("jvp")) {
            const std::string m = s["jvp"].get<std::string>();
            check(m == "exact" || m == "identity", "config: sampler.jvp must be exact or identity");
            cfg.sampler.exact_jvp = m == "exact";
        }
    }
    check(cfg.sampler_steps >= 2 && cfg.sampler_steps <= 256,
          "config: sampler.steps must be in [2, 256]");
    cfg.sampler.schedule = NoiseSchedule::linear(cfg.sampler_steps);

    if (j.contains("de")) {
        const json& d = j["de"];
        reject_unknown(d, {"population", "mutation_min", "mutation_max", "crossover", "rel_tol",
                           "max_iters", "tol_mode"},
                       "de");
        get_to(d, "population", cfg.de.population);
        get_to(d, "mutation_min", cfg.de.mutation_min);
        get_to(d, "mutation_max", cfg.de.mutation_max);
        get_to(d, "crossover", cfg.de.crossover);
        get_to(d, "rel_tol", cfg.de.rel_tol);
        get_to(d, "max_iters", cfg.de.max_iters);
        if (d.contains("tol_mode")) {
            const std::string m = d["tol_mode"].get<std::string>();
            check(m == "dispersion" || m == "best_change",
                  "config: de.tol_mode must be dispersion or best_change");
            cfg.de.tol_mode = m == "dispersion" ? DeConfig::TolMode::Dispersion
                                                : DeConfig::TolMode::BestChange;
        }
    }

    if (j.contains("adam")) {
        const json& a = j["adam"];
        reject_unknown(a, {"lr", "beta1", "beta2", "eps", "steps", "early_stop_rel", "patience"},
                       "adam");
        get_to(a, "lr", cfg.adam.lr);
        get_to(a, "beta1", cfg.adam.beta1);
        get_to(a, "beta2", cfg.adam.beta2);
        get_to(a, "eps", cfg.adam.eps);
        get_to(a, "steps", cfg.adam.steps);
        get_to(a, "early_stop_rel", cfg.adam.early_stop_rel);
        get_to(a, "patience", cfg.adam.patience);
    }

    if (j.contains("solver")) {
        const json& s = j["solver"];
        reject_unknown(s,
                       {"loops", "exp_steps", "sigma_init_factor", "warm_frac", "full_chain",
                        "nominal_spacing", "warm_start_motion", "joint_steps", "joint_lr",
                        "refine_adam_steps", "motion"},
                       "solver");
        get_to(s, "loops", cfg.solver.loops);
        get_to(s, "exp_steps", cfg.solver.exp_steps);
        get_to(s, "sigma_init_factor", cfg.solver.sigma_init_factor);
        get_to(s, "warm_frac", cfg.solver.warm_frac);
        get_to(s, "full_chain", cfg.solver.full_chain);
        get_to(s, "nominal_spacing", cfg.solver.nominal_spacing);
        get_to(s, "warm_start_motion", cfg.solver.warm_start_motion);
        get_to(s, "joint_steps", cfg.solver.joint_steps);
        get_to(s, "joint_lr", cfg.solver.joint_lr);
        get_to(s, "refine_adam_steps", cfg.solver.refine_adam_steps);
        if (s.contains("motion")) {
            const json& m = s["motion"];
            reject_unknown(m, {"param", "hidden", "velocity_scale"}, "solver.motion");
            get_to(m, "param", cfg.solver.motion.param);
            check(cfg.solver.motion.param == "mlp" || cfg.solver.motion.param == "grid",
                  "config: solver.motion.param must be mlp or grid");
            get_to(m, "hidden", cfg.solver.motion.hidden);
            get_to(m, "velocity_scale", cfg.solver.motion.velocity_scale);
        }
        check(cfg.solver.loops >= 1, "config: solver.loops must be >= 1");
    }

    if (j.contains("metrics")) {
        const json& m = j["metrics"];
        reject_unknown(m, {"fg_threshold", "lowpass_sigma_factor"}, "metrics");
        get_to(m, "fg_threshold", cfg.metrics.fg_threshold);
        get_to(m, "lowpass_sigma_factor", cfg.metrics.lowpass_sigma_factor);
    }
    return cfg;
}

std::string resolved_config_json(const RunConfig& c) {
    json j;
    j["grid"] = {{"nx", c.grid.nx}, {"ny", c.grid.ny}, {"nz", c.grid.nz}};
    j["seed"] = c.seed;
    j["sequence"] = {
        {"frames", c.sequence.frames},
        {"data_seed", c.sequence.data_seed},
        {"tag",
         {{"amplitude", c.sequence.tag.amplitude},
          {"spacing", c.sequence.tag.spacing},
          {"phase", c.sequence.tag.phase},
          {"dc", c.sequence.tag.dc}}},
        {"blur",
         {{"perp", c.sequence.blur.perp}, {"par", c.sequence.blur.par}, {"thru", c.sequence.blur.thru}}},
        {"noise_sigma", c.sequence.noise_sigma},
        {"fading", {{"scale_step", c.sequence.fade_scale}, {"shift_step", c.sequence.fade_shift}}},
        {"motion",
         {{"amplitude", c.sequence.motion.amplitude},
          {"smoothness", c.sequence.motion.smoothness},
          {"rk4_steps", c.sequence.motion.rk4_steps}}},
        {"phantom", {{"inner", c.sequence.phantom_inner}}}};
    j["prior"] = {{"type", c.prior.type},           {"templates", c.prior.templates},
                  {"sigma_p", c.prior.sigma_p},     {"lambda", c.prior.lambda},
                  {"p", c.prior.p},                 {"bank_seed", c.prior.bank_seed},
                  {"near_match_jitter", c.prior.near_match_jitter}};
    j["sampler"] = {{"steps", c.sampler_steps},
                    {"rho_star", c.sampler.rho_star},
                    {"ddim_eta", c.sampler.ddim_eta},
                    {"jvp", c.sampler.exact_jvp ? "exact" : "identity"},
                    {"rho_cap", c.sampler.rho_cap}};
    j["de"] = {{"population", c.de.population},
               {"mutation_min", c.de.mutation_min},
               {"mutation_max", c.de.mutation_max},
               {"crossover", c.de.crossover},
               {"rel_tol", c.de.rel_tol},
               {"max_iters", c.de.max_iters},
               {"tol_mode",
                c.de.tol_mode == DeConfig::TolMode::Dispersion ? "dispersion" : "best_change"}};
    j["adam"] = {{"lr", c.adam.lr},       {"beta1", c.adam.beta1},
                 {"beta2", c.adam.beta2}, {"eps", c.adam.eps},
                 {"steps", c.adam.steps}, {"early_stop_rel", c.adam.early_stop_rel},
                 {"patience", c.adam.patience}};
    j["solver"] = {{"loops", c.solver.loops},
                   {"exp_steps", c.solver.exp_steps},
                   {"sigma_init_factor", c.solver.sigma_init_factor},
                   {"warm_frac", c.solver.warm_frac},
                   {"full_chain", c.solver.full_chain},
                   {"nominal_spacing", c.solver.nominal_spacing},
                   {"warm_start_motion", c.solver.warm_start_motion},
                   {"joint_steps", c.solver.joint_steps},
                   {"joint_lr", c.solver.joint_lr},
                   {"refine_adam_steps", c.solver.refine_adam_steps},
                   {"motion",
                    {{"param", c.solver.motion.param},
                     {"hidden", c.solver.motion.hidden},
                     {"velocity_scale", c.solver.motion.velocity_scale}}}};
    j["metrics"] = {{"fg_threshold", c.metrics.fg_threshold},
                    {"lowpass_sigma_factor", c.metrics.lowpass_sigma_factor}};
    return j.dump(2) + "\n";
}

std::uint64_t config_hash(const RunConfig& cfg) {
    const std::string s = resolved_config_json(cfg);
    return fnv1a64(s.data(), s.size());
}

}  // namespace invtag
