#pragma once

#include <memory>
#include <string>
#include <vector>

#include "invtag/forward_model.hpp"
#include "invtag/motion.hpp"
#include "invtag/prior.hpp"
#include "invtag/run_config.hpp"
#include "invtag/sampler.hpp"

namespace invtag {

enum class SolverStage { Init, Frame1Loop, FrameT, Done };

struct BlockRecord {
    int frame = 0;
    int loop = 0;
    std::string block;
    double loss_before = 0.0;
    double loss_after = 0.0;
    int evals = 0;
    double seconds = 0.0;
    bool failed = false;
    std::string note;
};

/// Everything the coordinate descent owns. After the first-frame loop the
/// anatomy and the (alpha, gamma) estimates are frozen; per-frame fading and
/// motion freeze once their frame completes.
struct SolverState {
    Volume a;
    TagParams alpha;
    PsfParams gamma;
    std::vector<FadingParams> beta;
    std::vector<MotionNet> theta;       // mlp parametrization
    std::vector<VectorField> velocity;  // grid parametrization
    SolverStage stage = SolverStage::Init;
    int frames_done = 0;  // frames with frozen nuisance parameters
    bool frozen = false;  // a*, alpha*, gamma*
    std::vector<BlockRecord> history;
    std::vector<std::string> flags;
    /// Per-step sampler diagnostics: loop, step index, L_rec, |guidance|.
    std::vector<std::array<double, 4>> dps_trace;
    std::uint64_t seed = 0;
};

class CddpSolver {
  public:
    CddpSolver(const RunConfig& cfg, std::vector<std::array<Volume, 3>> measurements,
               std::shared_ptr<const ScoreModel> prior);

    /// Alg. 1 initialization: a = lowpass(avg(g_1)), q = 1, phi = Id,
    /// h = delta, f = Id.
    void initialize();

    /// Frame 1 runs the L-loop over (PSF, tags, anatomy, motion) and freezes
    /// (a*, alpha*, gamma*); frames t >= 2 alternate fading and motion with a
    /// warm-started network.
    void run_frame(int t);

    /// Joint-Adam ablation (no coordinate descent, no diffusion): optimizes
    /// anatomy, tag, PSF, fading and all motion networks simultaneously.
    void run_joint();

    int frames() const { return int(g_.size()); }
    const SolverState& state() const { return state_; }
    SolverState& mutable_state() { return state_; }
    const RunConfig& config() const { return cfg_; }

    VectorField frame_velocity(int t) const;  // either parametrization
    DeformField frame_deform(int t) const;
    Volume frame_cine(int t) const;  // pullback(a*, phi_t)

    double frame_loss(int t) const;  // L_rec^t at the current state

  private:
    double frame_loss_with(int t, const TagParams& alpha, const PsfParams& gamma,
                           const FadingParams& beta, const VectorField& phi) const;
    void run_motion_block(int t, int loop, int steps);
    void guard_not_frozen(const char* what) const;

    RunConfig cfg_;
    std::vector<std::array<Volume, 3>> g_;
    std::shared_ptr<const ScoreModel> prior_;
    SolverState state_;
};

/// Checkpoint I/O: `dir` receives state.json, a.ivt and one IVTW per
/// initialized frame. Loading requires the same config hash.
void save_checkpoint(const std::string& dir, const CddpSolver& solver);
void load_checkpoint(const std::string& dir, CddpSolver& solver);

}  // namespace invtag
