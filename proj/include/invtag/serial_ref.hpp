#pragma once

#include "invtag/grid.hpp"
#include "invtag/motion.hpp"

namespace invtag::serial {

// Plain-loop twins of the OpenMP kernels. The parallel paths are written so
// that results do not depend on the thread count; these single-threaded
// versions exist to pin that contract in tests (bitwise equality) and to give
// the benchmark a baseline.

Volume conv_gaussian(const Volume& v, double sx, double sy, double sz);
Volume pullback(const Volume& u, const VectorField& phi);
VectorField eval_velocity(const MotionNet& net, const GridSpec& grid);
DeformField exp_velocity(const VectorField& v, int steps);
ComplexVolume dft3_forward(const Volume& v);

}  // namespace invtag::serial
