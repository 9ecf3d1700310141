#pragma once

#include <array>
#include <span>

#include "invtag/grid.hpp"

namespace invtag {

/// Tag propagation direction (perpendicular to the tag lines). Only the three
/// canonical axes are supported.
enum class TagOrientation : int { X = 0, Y = 1, Z = 2 };

constexpr std::array<TagOrientation, 3> kAllOrientations = {TagOrientation::X, TagOrientation::Y,
                                                            TagOrientation::Z};

constexpr char orientation_letter(TagOrientation o) {
    return o == TagOrientation::X ? 'x' : (o == TagOrientation::Y ? 'y' : 'z');
}

/// Sinusoidal base-tag parameters, shared across orientations.
struct TagParams {
    double amplitude = 0.0;  // alpha1
    double spacing = 10.0;   // alpha2, voxels
    double phase = 0.0;      // alpha3, radians
    double dc = 1.0;         // alpha4
};

/// Anisotropic Gaussian PSF sigmas in the tag frame (voxels).
struct PsfParams {
    double perp = 0.0;  // along the tag direction (in-plane, orthogonal to tag lines)
    double par = 0.0;   // in-plane, parallel to tag lines
    double thru = 0.0;  // through-plane
};

/// Per-frame affine tag fading |scale * q + shift|.
struct FadingParams {
    double scale = 1.0;  // beta1
    double shift = 0.0;  // beta2
};

struct NoiseModel {
    double sigma = 0.0;  // stddev as a fraction of the dynamic range
};

/// Maps (perp, par, thru) onto grid-axis sigmas for one acquisition stack.
/// Slice axis: z for the x- and y-tagged stacks, y for the z-tagged stack.
std::array<double, 3> psf_axis_sigmas(TagOrientation o, const PsfParams& p);

/// q(r) = amplitude * cos(2*pi*<o, r>/spacing + phase) + dc at voxel centers.
Volume base_tag(const GridSpec& g, TagOrientation o, const TagParams& alpha);

/// Pointwise |scale * q + shift|.
Volume apply_fading(const Volume& q, const FadingParams& beta);

enum class Interp { Trilinear, Nearest };

/// Pullback (phi^* u)(r) = u(phi(r)); phi holds absolute target coordinates.
Volume pullback(const Volume& u, const VectorField& phi, Interp mode = Interp::Trilinear);

/// Full measurement operator: blur(pullback(a .* fade(tag))).
Volume forward_measure(const Volume& a, TagOrientation o, const TagParams& alpha,
                       const PsfParams& gamma, const FadingParams& beta, const VectorField& phi);

/// Per-frame parameters bundled for loss evaluation.
struct FrameOperator {
    TagParams alpha;
    PsfParams gamma;
    FadingParams beta;
    const VectorField* phi = nullptr;  // required
};

/// sum over orientations of ||g - A(a)||_2^2 for one frame.
double residual_loss(const Volume& a, const FrameOperator& op, std::span<const Volume> g_per_orient);

/// Convenience: total loss over frames (sum of per-frame residuals).
double residual_loss_total(std::span<const double> per_frame);

/// The measurement operator is linear in the anatomy once the nuisance
/// parameters are fixed. This precomputes the faded tag fields so repeated
/// apply/adjoint calls (DPS guidance, adjoint tests) skip the tag setup.
class LinearForward {
  public:
    LinearForward(GridSpec g, const TagParams& alpha, const PsfParams& gamma,
                  const FadingParams& beta, const VectorField* phi);

    Volume apply(const Volume& x, TagOrientation o) const;

    /// Exact adjoint: faded_tag .* splat(conv_adjoint(y)).
    Volume adjoint(const Volume& y, TagOrientation o) const;

    /// Residual loss and its gradient wrt the anatomy:
    /// grad = sum_o adjoint(2 * (apply(a, o) - g_o)).
    double loss_and_grad(const Volume& a, std::span<const Volume> g, Volume* grad) const;

    const Volume& faded_tag(TagOrientation o) const { return faded_[size_t(o)]; }
    const VectorField& phi() const { return *phi_; }
    const PsfParams& gamma() const { return gamma_; }

  private:
    GridSpec grid_;
    PsfParams gamma_;
    std::array<Volume, 3> faded_;
    const VectorField* phi_;
};

}  // namespace invtag
