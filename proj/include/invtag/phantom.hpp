#pragma once

#include <array>
#include <vector>

#include "invtag/forward_model.hpp"
#include "invtag/grid.hpp"
#include "invtag/motion.hpp"
#include "invtag/rng.hpp"

namespace invtag {

struct Ellipsoid {
    std::array<double, 3> center;     // voxels
    std::array<double, 3> semi_axes;  // voxels
    std::array<double, 3> euler_zyx;  // radians
    double intensity = 0.5;
    double edge_softness = 1.0;  // sigma of the sigmoid edge, voxels; 0 = hard
};

struct PhantomSpec {
    GridSpec grid;
    std::vector<Ellipsoid> ellipsoids;
    double background = 0.0;
};

/// Sum of soft ellipsoid indicators (sigmoid of the normalized signed
/// distance), clipped to [0, 1].
Volume render_phantom(const PhantomSpec& spec);

/// Signed distance used by the renderer (normalized algebraic distance scaled
/// by the smallest semi-axis; negative inside).
double ellipsoid_signed_distance(const Ellipsoid& e, double x, double y, double z);

/// Head-like composite: one large envelope plus `inner` random structures.
PhantomSpec make_phantom_spec(GridSpec g, int inner, Rng rng);

/// Small random perturbation of every ellipsoid (centers, axes, intensity):
/// a "near match" of the source phantom for template banks.
PhantomSpec jitter_phantom_spec(const PhantomSpec& spec, double rel, Rng rng);

struct MotionSpec {
    std::uint64_t seed = 0;
    double amplitude = 5.0;    // max |v| scaling; ~cumulative displacement at t = T
    double smoothness = 10.0;  // Gaussian scale of the vector potential, voxels
    int rk4_steps = 8;         // RK4 steps per frame interval
};

/// Divergence-free stationary velocity: curl of smoothed white-noise vector
/// potentials (computed on a 1-voxel padded grid so every returned voxel gets
/// a central-difference curl).
VectorField make_divergence_free_velocity(const MotionSpec& spec, GridSpec g);

/// Lagrangian maps phi_t (frame-t coords -> reference coords) for t = 1..T:
/// each voxel's trajectory under -v integrated by classical RK4 to time t/T.
std::vector<DeformField> make_divergence_free_motion(const MotionSpec& spec, GridSpec g, int T);

struct SequenceSpec {
    int frames = 6;
    TagParams alpha;
    PsfParams gamma;
    double noise_sigma = 0.0;  // fraction of the noiseless dynamic range
    // affine fading trajectory: scale 1 - fade_scale*(t-1), shift fade_shift*(t-1)
    double fade_scale = 0.1;
    double fade_shift = 0.05;

    FadingParams beta_at(int t) const {  // t is 1-based
        return FadingParams{1.0 - fade_scale * (t - 1), fade_shift * (t - 1)};
    }
};

struct GroundTruth {
    Volume anatomy;
    std::vector<DeformField> deform;  // per frame
    std::vector<Volume> cine;         // pullback(anatomy, phi_t)
    std::vector<FadingParams> beta;
    TagParams alpha;
    PsfParams gamma;
    double noise_sigma = 0.0;
};

struct SimulatedSequence {
    std::vector<std::array<Volume, 3>> g;  // [frame][orientation]
    GroundTruth truth;
};

/// Renders the tagged sequence through the forward model plus seeded Gaussian
/// noise, and returns the full ground-truth bundle.
SimulatedSequence render_sequence(const Volume& phantom, const std::vector<DeformField>& motion,
                                  const SequenceSpec& seq, Rng rng);

}  // namespace invtag
