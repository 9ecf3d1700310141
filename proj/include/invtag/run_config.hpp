#pragma once

#include <optional>
#include <string>

#include "invtag/forward_model.hpp"
#include "invtag/grid.hpp"
#include "invtag/optim.hpp"
#include "invtag/phantom.hpp"
#include "invtag/sampler.hpp"

namespace invtag {

/// Bounds used by the DE blocks (the spec's solver boxes).
struct ParamBounds {
    double psf_max = 4.0;                        // gamma in [0, 4]
    double amp_lo = 0.5, amp_hi = 1.0;           // alpha1
    double spacing_rel_lo = 0.9, spacing_rel_hi = 1.1;  // alpha2 / nominal
    double dc_lo = 0.0, dc_hi = 0.5;             // alpha4
    double fade_lo = 0.0, fade_hi = 1.0;         // beta components
};

struct MotionConfig {
    std::string param = "mlp";  // "mlp" | "grid"
    std::vector<int> hidden = {128, 128, 128};
    double velocity_scale = 1.0;
};

struct SolverConfig {
    int loops = 4;  // L
    int exp_steps = 7;
    double sigma_init_factor = 2.2;  // sigma_init = factor * spacing / (2 pi)
    double warm_frac = 0.4;
    bool full_chain = false;
    double nominal_spacing = 10.0;
    bool warm_start_motion = true;
    bool ablate_psf = false;
    bool ablate_fading = false;
    bool ablate_cddp = false;
    int joint_steps = 300;
    double joint_lr = 2e-3;
    int refine_adam_steps = 0;  // 0 -> same as adam.steps
    MotionConfig motion;
    ParamBounds bounds;
};

struct PriorConfig {
    std::string type = "gmm";  // "gmm" | "gp"
    int templates = 8;
    double sigma_p = 0.05;
    double lambda = 4.0;
    double p = 2.0;
    std::uint64_t bank_seed = 1234;
    double near_match_jitter = 0.02;  // template 0 = jittered test phantom
};

struct SequenceConfig {
    int frames = 6;
    /// Seeds the data generation (phantom, motion, noise) separately from the
    /// master seed, so solver-seed sweeps rerun on identical measurements.
    std::uint64_t data_seed = 5;
    TagParams tag{0.7, 10.0, 0.3, 0.25};
    PsfParams blur{1.0, 1.0, 1.0};
    double noise_sigma = 0.0;
    double fade_scale = 0.1;
    double fade_shift = 0.05;
    MotionSpec motion{0, 5.0, 10.0, 8};
    int phantom_inner = 6;
};

struct MetricsConfig {
    double fg_threshold = 0.05;
    double lowpass_sigma_factor = 0.5;  // sigma_c = factor * true spacing
};

struct RunConfig {
    GridSpec grid{48, 48, 48};
    std::uint64_t seed = 0;
    SequenceConfig sequence;
    PriorConfig prior;
    SamplerConfig sampler;  // schedule built from sampler_steps
    int sampler_steps = 64;
    DeConfig de;
    AdamConfig adam;
    SolverConfig solver;
    MetricsConfig metrics;
};

/// Parses and validates a config document. Unknown keys are rejected with
/// their JSON path; missing keys take the defaults above.
RunConfig parse_run_config(const std::string& json_text);

/// Fully-resolved echo of the configuration (defaults applied), serialized
/// with sorted keys so identical configs serialize identically.
std::string resolved_config_json(const RunConfig& cfg);

/// FNV-1a hash of the resolved config text.
std::uint64_t config_hash(const RunConfig& cfg);

}  // namespace invtag
