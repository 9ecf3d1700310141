#pragma once

#include <array>
#include <span>
#include <vector>

#include "invtag/forward_model.hpp"
#include "invtag/grid.hpp"
#include "invtag/ivt_io.hpp"
#include "invtag/rng.hpp"

namespace invtag {

/// Coordinate network: normalized position in [-1,1]^3 -> velocity (voxels).
/// Fully connected, tanh hidden activations, linear output scaled by
/// velocity_scale. The output layer starts at zero so the initial deformation
/// is the identity.
struct MotionNetSpec {
    std::vector<int> hidden = {128, 128, 128};
    double velocity_scale = 1.0;
};

struct MotionNet {
    MotionNetSpec spec;
    std::vector<std::vector<float>> W;  // W[l]: rows x cols, row-major, rows = outputs
    std::vector<std::vector<float>> b;

    static MotionNet init(const MotionNetSpec& spec, Rng rng);

    size_t layer_count() const { return W.size(); }
    size_t param_count() const;
    std::vector<double> flatten() const;
    void unflatten(std::span<const double> params);

    WeightsBlob to_blob() const;
    static MotionNet from_blob(const WeightsBlob& blob, double velocity_scale);
};

/// Deformation as absolute target coordinates plus the squaring count that
/// produced it.
struct DeformField {
    VectorField phi;
    int steps = 0;
};

/// Network evaluated at every voxel center (normalized coordinates).
VectorField eval_velocity(const MotionNet& net, const GridSpec& grid);

/// Diffeomorphic exponential by scaling and squaring: phi_0 = id + v/2^S,
/// then S self-compositions via clamp-to-edge trilinear resampling. The chain
/// is composed in double and rounded once on output, so the 2^S error
/// amplification of the squaring stays below the f32 quantum.
DeformField exp_velocity(const VectorField& v, int steps);

/// Determinant of the central-difference Jacobian (one-sided at the border).
Volume jacobian_det(const DeformField& d);

/// One frame of the data term with everything but the motion frozen.
struct MotionProblem {
    const Volume* a = nullptr;
    TagParams alpha;
    PsfParams gamma;
    FadingParams beta;
    std::array<const Volume*, 3> g = {nullptr, nullptr, nullptr};
    int exp_steps = 7;
};

/// Precomputes the faded-tag products so Adam iterations only pay for the
/// warp, the blur, and the backward chain.
class PreparedMotionLoss {
  public:
    explicit PreparedMotionLoss(const MotionProblem& p);

    /// L_rec^t(v) and (optionally) its exact gradient wrt the voxel velocity.
    double loss_and_velocity_grad(const VectorField& v, VectorField* grad) const;

    const GridSpec& grid() const { return grid_; }
    int exp_steps() const { return steps_; }

  private:
    GridSpec grid_;
    int steps_;
    std::array<Volume, 3> pre_warp_;             // a .* fade(tag_o)
    std::array<std::array<double, 3>, 3> sig_;  // grid-axis sigmas per orientation
    std::array<const Volume*, 3> g_;
};

struct MotionGradResult {
    double loss = 0.0;
    std::vector<double> grad;  // same flattening as MotionNet::flatten()
};

/// Exact reverse-mode gradient of the frame residual wrt the network weights:
/// residual -> PSF adjoint -> warp sensitivity -> squaring backward -> MLP.
MotionGradResult motion_loss_grad(const MotionNet& net, const GridSpec& grid,
                                  const PreparedMotionLoss& loss);

}  // namespace invtag
