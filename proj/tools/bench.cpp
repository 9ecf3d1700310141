// Kernel benchmark: OpenMP paths against the serial reference, with a bitwise
// equality check (the parallel kernels are written to be thread-count
// invariant, so any nonzero difference is a bug).
#include <chrono>
#include <cstdio>
#include <cstring>

#include "invtag/conv.hpp"
#include "invtag/dft.hpp"
#include "invtag/forward_model.hpp"
#include "invtag/motion.hpp"
#include "invtag/parallel.hpp"
#include "invtag/rng.hpp"
#include "invtag/serial_ref.hpp"

using namespace invtag;

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

template <typename F>
double time_best_of(int reps, F&& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const double t0 = now_ms();
        fn();
        best = std::min(best, now_ms() - t0);
    }
    return best;
}

double max_diff(const Volume& a, const Volume& b) {
    double m = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::fabs(double(a.data[size_t(i)]) - double(b.data[size_t(i)])));
    return m;
}

double max_diff(const VectorField& a, const VectorField& b) {
    double m = 0.0;
    for (int c = 0; c < 3; ++c)
        for (std::int64_t i = 0; i < a.size(); ++i)
            m = std::max(m, std::fabs(double(a.comp[size_t(c)][size_t(i)]) -
                                      double(b.comp[size_t(c)][size_t(i)])));
    return m;
}

void row(const char* name, double serial_ms, double parallel_ms, double diff) {
    std::printf("%-22s %10.2f %10.2f %8.2fx %10.3g\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms, diff);
}

}  // namespace

int main(int argc, char** argv) {
    const int n = argc > 1 ? std::atoi(argv[1]) : 48;
    const int reps = argc > 2 ? std::atoi(argv[2]) : 3;
    GridSpec g{n, n, n};
    std::printf("grid %d^3, %d threads, best of %d\n", n, thread_count(), reps);
    std::printf("%-22s %10s %10s %9s %10s\n", "kernel", "serial ms", "omp ms", "speedup", "maxdiff");

    Rng rng(7);
    Volume vol(g);
    for (auto& x : vol.data) x = float(rng.uniform());

    VectorField phi = VectorField::identity_map(g);
    for (std::int64_t i = 0; i < g.count(); ++i) {
        phi.comp[0][size_t(i)] += float(1.5 * std::sin(2 * M_PI * i / g.count()));
        phi.comp[1][size_t(i)] -= 0.7f;
    }

    VectorField vel(g);
    Rng vr(11);
    for (auto& c : vel.comp)
        for (auto& x : c) x = float(2.0 * vr.uniform() - 1.0);

    MotionNetSpec spec;
    spec.hidden = {48, 48, 48};
    MotionNet net = MotionNet::init(spec, Rng(3));
    for (auto& layer : net.W)
        for (auto& w : layer) w = float(0.3 * (2.0 * vr.uniform() - 1.0));

    {
        Volume a, b;
        const double ts = time_best_of(reps, [&] { a = serial::conv_gaussian(vol, 1.5, 1.0, 2.5); });
        const double tp = time_best_of(reps, [&] { b = conv_gaussian(vol, 1.5, 1.0, 2.5); });
        row("conv_gaussian", ts, tp, max_diff(a, b));
    }
    {
        Volume a, b;
        const double ts = time_best_of(reps, [&] { a = serial::pullback(vol, phi); });
        const double tp = time_best_of(reps, [&] { b = pullback(vol, phi); });
        row("pullback", ts, tp, max_diff(a, b));
    }
    {
        VectorField a, b;
        const double ts = time_best_of(reps, [&] { a = serial::eval_velocity(net, g); });
        const double tp = time_best_of(reps, [&] { b = eval_velocity(net, g); });
        row("eval_velocity", ts, tp, max_diff(a, b));
    }
    {
        DeformField a, b;
        const double ts = time_best_of(reps, [&] { a = serial::exp_velocity(vel, 7); });
        const double tp = time_best_of(reps, [&] { b = exp_velocity(vel, 7); });
        row("exp_velocity", ts, tp, max_diff(a.phi, b.phi));
    }
    {
        ComplexVolume a, b;
        const double ts = time_best_of(reps, [&] { a = serial::dft3_forward(vol); });
        const double tp = time_best_of(reps, [&] { b = dft3_forward(vol); });
        double d = 0.0;
        for (std::int64_t i = 0; i < a.size(); ++i) {
            d = std::max(d, std::fabs(a.re[size_t(i)] - b.re[size_t(i)]));
            d = std::max(d, std::fabs(a.im[size_t(i)] - b.im[size_t(i)]));
        }
        row("dft3_forward", ts, tp, d);
    }
    {
        Volume out;
        const TagParams alpha{0.7, 10.0, 0.3, 0.3};
        const PsfParams gamma{1.0, 1.0, 1.0};
        const double tp = time_best_of(reps, [&] {
            out = forward_measure(vol, TagOrientation::X, alpha, gamma, FadingParams{0.9, 0.05}, phi);
        });
        std::printf("%-22s %10s %10.2f %9s %10s\n", "forward_measure", "-", tp, "-", "-");
    }
    return 0;
}
