#include "invtag/motion.hpp"

#include <cmath>
#include <cstring>

#include "invtag/conv.hpp"
#include "invtag/fast_math.hpp"
#include "invtag/error.hpp"
#include "invtag/interp.hpp"
#include "invtag/parallel.hpp"

namespace invtag {

namespace {

std::vector<int> layer_sizes(const MotionNetSpec& spec) {
    std::vector<int> s;
    s.push_back(3);
    for (int h : spec.hidden) s.push_back(h);
    s.push_back(3);
    return s;
}

}  // namespace

MotionNet MotionNet::init(const MotionNetSpec& spec, Rng rng) {
    MotionNet net;
    net.spec = spec;
    const auto sizes = layer_sizes(spec);
    const size_t L = sizes.size() - 1;
    net.W.resize(L);
    net.b.resize(L);
    for (size_t l = 0; l < L; ++l) {
        const int rows = sizes[l + 1], cols = sizes[l];
        net.W[l].assign(size_t(rows) * cols, 0.0f);
        net.b[l].assign(size_t(rows), 0.0f);
        if (l + 1 < L) {  // hidden layers: Xavier-uniform; output layer stays zero
            Rng r = rng.sub(l + 1);
            const double lim = std::sqrt(6.0 / double(rows + cols));
            for (auto& w : net.W[l]) w = float((2.0 * r.uniform() - 1.0) * lim);
        }
    }
    return net;
}

size_t MotionNet::param_count() const {
    size_t n = 0;
    for (size_t l = 0; l < W.size(); ++l) n += W[l].size() + b[l].size();
    return n;
}

std::vector<double> MotionNet::flatten() const {
    std::vector<double> out;
    out.reserve(param_count());
    for (size_t l = 0; l < W.size(); ++l) {
        for (float w : W[l]) out.push_back(double(w));
        for (float v : b[l]) out.push_back(double(v));
    }
    return out;
}

void MotionNet::unflatten(std::span<const double> params) {
    check(params.size() == param_count(), "MotionNet::unflatten: size mismatch");
    size_t i = 0;
    for (size_t l = 0; l < W.size(); ++l) {
        for (auto& w : W[l]) w = float(params[i++]);
        for (auto& v : b[l]) v = float(params[i++]);
    }
}

WeightsBlob MotionNet::to_blob() const {
    WeightsBlob blob;
    const auto sizes = layer_sizes(spec);
    for (size_t l = 0; l < W.size(); ++l) {
        WeightsBlob::Layer layer;
        layer.rows = std::uint32_t(sizes[l + 1]);
        layer.cols = std::uint32_t(sizes[l]);
        layer.w = W[l];
        layer.b = b[l];
        blob.layers.push_back(std::move(layer));
    }
    return blob;
}

MotionNet MotionNet::from_blob(const WeightsBlob& blob, double velocity_scale) {
    check(blob.layers.size() >= 2, "weights blob: need at least two layers");
    MotionNet net;
    net.spec.velocity_scale = velocity_scale;
    net.spec.hidden.clear();
    for (size_t l = 0; l + 1 < blob.layers.size(); ++l)
        net.spec.hidden.push_back(int(blob.layers[l].rows));
    check(blob.layers.front().cols == 3 && blob.layers.back().rows == 3,
          "weights blob: not a 3->3 coordinate network");
    for (const auto& l : blob.layers) {
        net.W.push_back(l.w);
        net.b.push_back(l.b);
    }
    return net;
}

namespace {

constexpr std::int64_t kBlockVoxels = 2048;

// Activations are stored feature-major ([feature][voxel]) so every inner loop
// below runs over a contiguous voxel span and vectorizes.

// C[rows][B] = tanh?(W[rows x cols] * X[cols][B] + b). The `omp simd`
// pragmas license vector codegen (including reduction reordering); the
// resulting order is fixed at compile time, so results stay reproducible and
// thread-count independent.
void dense_forward(std::int64_t B, int rows, int cols, const float* __restrict__ X,
                   const float* __restrict__ W, const float* __restrict__ bias,
                   float* __restrict__ C, bool tanh_act) {
    for (int o = 0; o < rows; ++o) {
        float* __restrict__ dst = C + std::int64_t(o) * B;
        const float b = bias[o];
        for (std::int64_t r = 0; r < B; ++r) dst[r] = b;
        const float* w = W + std::int64_t(o) * cols;
        for (int i = 0; i < cols; ++i) {
            const float wi = w[i];
            const float* __restrict__ src = X + std::int64_t(i) * B;
#pragma omp simd
            for (std::int64_t r = 0; r < B; ++r) dst[r] += wi * src[r];
        }
        if (tanh_act) {
#pragma omp simd
            for (std::int64_t r = 0; r < B; ++r) dst[r] = fast_tanhf(dst[r]);
        }
    }
}

// Dprev[cols][B] = W^T[cols x rows] * D[rows][B]
void dense_backward_data(std::int64_t B, int rows, int cols, const float* __restrict__ D,
                         const float* __restrict__ W, float* __restrict__ Dprev) {
    std::memset(Dprev, 0, size_t(cols) * size_t(B) * sizeof(float));
    for (int o = 0; o < rows; ++o) {
        const float* __restrict__ d = D + std::int64_t(o) * B;
        const float* w = W + std::int64_t(o) * cols;
        for (int i = 0; i < cols; ++i) {
            const float wi = w[i];
            float* __restrict__ p = Dprev + std::int64_t(i) * B;
#pragma omp simd
            for (std::int64_t r = 0; r < B; ++r) p[r] += wi * d[r];
        }
    }
}

// gradW[o][i] += <D[o][:], A[i][:]>; gradB[o] += sum(D[o][:]).
// Fixed 8-lane partial sums keep the reduction order deterministic while
// letting it vectorize.
void dense_backward_weights(std::int64_t B, int rows, int cols, const float* __restrict__ D,
                            const float* __restrict__ A, double* __restrict__ gradW,
                            double* __restrict__ gradB) {
    for (int o = 0; o < rows; ++o) {
        const float* __restrict__ d = D + std::int64_t(o) * B;
        double* gw = gradW + std::int64_t(o) * cols;
        for (int i = 0; i < cols; ++i) {
            const float* __restrict__ a = A + std::int64_t(i) * B;
            float acc = 0.0f;
#pragma omp simd reduction(+ : acc)
            for (std::int64_t r = 0; r < B; ++r) acc += d[r] * a[r];
            gw[i] += double(acc);
        }
        float bs = 0.0f;
#pragma omp simd reduction(+ : bs)
        for (std::int64_t r = 0; r < B; ++r) bs += d[r];
        gradB[o] += double(bs);
    }
}

struct MlpScratch {
    std::vector<float> X;                // [3][B] normalized coords
    std::vector<std::vector<float>> H;   // activations per hidden layer, [h][B]
    std::vector<float> V;                // [3][B] output
    std::vector<std::vector<float>> D;   // cotangents per layer
};

void fill_coords(const GridSpec& g, std::int64_t lo, std::int64_t hi, float* X) {
    const std::int64_t B = hi - lo;
    const double sx = g.nx > 1 ? 2.0 / double(g.nx - 1) : 0.0;
    const double sy = g.ny > 1 ? 2.0 / double(g.ny - 1) : 0.0;
    const double sz = g.nz > 1 ? 2.0 / double(g.nz - 1) : 0.0;
    for (std::int64_t idx = lo; idx < hi; ++idx) {
        const int i = int(idx % g.nx);
        const int j = int((idx / g.nx) % g.ny);
        const int k = int(idx / (std::int64_t(g.nx) * g.ny));
        X[idx - lo] = float(double(i) * sx - 1.0);
        X[B + (idx - lo)] = float(double(j) * sy - 1.0);
        X[2 * B + (idx - lo)] = float(double(k) * sz - 1.0);
    }
}

// Forward through all layers for one block; H[l] filled for hidden layers.
void mlp_block_forward(const MotionNet& net, std::int64_t B, MlpScratch& s) {
    const size_t L = net.W.size();
    s.H.resize(L - 1);
    const float* in = s.X.data();
    int in_dim = 3;
    for (size_t l = 0; l + 1 < L; ++l) {
        const int out_dim = int(net.b[l].size());
        s.H[l].resize(size_t(B) * out_dim);
        dense_forward(B, out_dim, in_dim, in, net.W[l].data(), net.b[l].data(), s.H[l].data(), true);
        in = s.H[l].data();
        in_dim = out_dim;
    }
    s.V.resize(size_t(B) * 3);
    dense_forward(B, 3, in_dim, in, net.W[L - 1].data(), net.b[L - 1].data(), s.V.data(), false);
}

}  // namespace

VectorField eval_velocity(const MotionNet& net, const GridSpec& grid) {
    VectorField v(grid);
    const std::int64_t n = grid.count();
    const std::int64_t nblocks = (n + kBlockVoxels - 1) / kBlockVoxels;
    const float scale = float(net.spec.velocity_scale);
#ifdef _OPENMP
#pragma omp parallel
#endif
    {
        MlpScratch s;
        s.X.resize(size_t(kBlockVoxels) * 3);
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
        for (std::int64_t blk = 0; blk < nblocks; ++blk) {
            const std::int64_t lo = blk * kBlockVoxels;
            const std::int64_t hi = lo + kBlockVoxels < n ? lo + kBlockVoxels : n;
            const std::int64_t B = hi - lo;
            fill_coords(grid, lo, hi, s.X.data());
            mlp_block_forward(net, B, s);
            for (int c = 0; c < 3; ++c)
                for (std::int64_t r = 0; r < B; ++r)
                    v.comp[size_t(c)][size_t(lo + r)] = s.V[size_t(c * B + r)] * scale;
        }
    }
    return v;
}

namespace {

// Composition chain in double; the f32 quantum of a stored map would be
// amplified by 2^S through the squarings otherwise.
struct DblField {
    std::array<std::vector<double>, 3> c;
    explicit DblField(std::int64_t n) {
        for (auto& v : c) v.assign(size_t(n), 0.0);
    }
};

std::vector<DblField> exp_chain(const VectorField& v, int steps) {
    check(steps >= 0, "exp_velocity: steps must be >= 0");
    const GridSpec g = v.grid;
    const std::int64_t n = g.count();
    std::vector<DblField> phis;
    phis.reserve(size_t(steps) + 1);

    DblField phi(n);
    const double inv = 1.0 / double(std::int64_t(1) << steps);
    parallel_for(n, [&](std::int64_t idx) {
        const int i = int(idx % g.nx);
        const int j = int((idx / g.nx) % g.ny);
        const int k = int(idx / (std::int64_t(g.nx) * g.ny));
        phi.c[0][size_t(idx)] = i + double(v.comp[0][size_t(idx)]) * inv;
        phi.c[1][size_t(idx)] = j + double(v.comp[1][size_t(idx)]) * inv;
        phi.c[2][size_t(idx)] = k + double(v.comp[2][size_t(idx)]) * inv;
    });
    phis.push_back(std::move(phi));

    for (int s = 0; s < steps; ++s) {
        const DblField& cur = phis.back();
        DblField next(n);
        parallel_for(n, [&](std::int64_t idx) {
            const LinCell cell = locate_value(g, cur.c[0][size_t(idx)], cur.c[1][size_t(idx)],
                                              cur.c[2][size_t(idx)]);
            next.c[0][size_t(idx)] = cell_value(g, cur.c[0].data(), cell);
            next.c[1][size_t(idx)] = cell_value(g, cur.c[1].data(), cell);
            next.c[2][size_t(idx)] = cell_value(g, cur.c[2].data(), cell);
        });
        phis.push_back(std::move(next));
    }
    return phis;
}

VectorField to_f32(const GridSpec& g, const DblField& d) {
    VectorField f(g);
    parallel_for(g.count(), [&](std::int64_t idx) {
        f.comp[0][size_t(idx)] = float(d.c[0][size_t(idx)]);
        f.comp[1][size_t(idx)] = float(d.c[1][size_t(idx)]);
        f.comp[2][size_t(idx)] = float(d.c[2][size_t(idx)]);
    });
    return f;
}

}  // namespace

DeformField exp_velocity(const VectorField& v, int steps) {
    auto phis = exp_chain(v, steps);
    return DeformField{to_f32(v.grid, phis.back()), steps};
}

Volume jacobian_det(const DeformField& d) {
    const GridSpec g = d.phi.grid;
    Volume det(g);
    parallel_for(g.count(), [&](std::int64_t idx) {
        const int i = int(idx % g.nx);
        const int j = int((idx / g.nx) % g.ny);
        const int k = int(idx / (std::int64_t(g.nx) * g.ny));
        double J[3][3];
        for (int c = 0; c < 3; ++c) {
            const float* f = d.phi.comp[size_t(c)].data();
            auto diff = [&](int axis) {
                int lo_i = i, hi_i = i, lo_j = j, hi_j = j, lo_k = k, hi_k = k;
                int n = axis == 0 ? g.nx : (axis == 1 ? g.ny : g.nz);
                int& lo = axis == 0 ? lo_i : (axis == 1 ? lo_j : lo_k);
                int& hi = axis == 0 ? hi_i : (axis == 1 ? hi_j : hi_k);
                int p = axis == 0 ? i : (axis == 1 ? j : k);
                lo = p > 0 ? p - 1 : p;
                hi = p < n - 1 ? p + 1 : p;
                const double num = double(f[g.index(hi_i, hi_j, hi_k)]) - double(f[g.index(lo_i, lo_j, lo_k)]);
                return num / double(hi - lo);
            };
            J[c][0] = diff(0);
            J[c][1] = diff(1);
            J[c][2] = diff(2);
        }
        det.data[size_t(idx)] = float(J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) -
                                      J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
                                      J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]));
    });
    return det;
}

PreparedMotionLoss::PreparedMotionLoss(const MotionProblem& p) {
    check(p.a != nullptr, "MotionProblem: missing anatomy");
    grid_ = p.a->grid;
    steps_ = p.exp_steps;
    for (auto o : kAllOrientations) {
        const size_t oi = size_t(o);
        check(p.g[oi] != nullptr && p.g[oi]->grid == grid_, "MotionProblem: bad measurement %zu", oi);
        g_[oi] = p.g[oi];
        Volume faded = apply_fading(base_tag(grid_, o, p.alpha), p.beta);
        parallel_for(grid_.count(), [&](std::int64_t i) {
            faded.data[size_t(i)] = float(double(faded.data[size_t(i)]) * double(p.a->data[size_t(i)]));
        });
        pre_warp_[oi] = std::move(faded);
        sig_[oi] = psf_axis_sigmas(o, p.gamma);
    }
}

double PreparedMotionLoss::loss_and_velocity_grad(const VectorField& v, VectorField* grad) const {
    check(v.grid == grid_, "velocity grid mismatch");
    const std::int64_t n = grid_.count();
    auto phis = exp_chain(v, steps_);
    const DblField& phi = phis.back();

    double loss = 0.0;
    VectorField dphi(grid_);  // dL/dphi_S, built orientation by orientation
    for (auto o : kAllOrientations) {
        const size_t oi = size_t(o);
        const Volume& m = pre_warp_[oi];
        Volume warped(grid_);
        parallel_for(n, [&](std::int64_t i) {
            const LinCell cell =
                locate_value(grid_, phi.c[0][size_t(i)], phi.c[1][size_t(i)], phi.c[2][size_t(i)]);
            warped.data[size_t(i)] = float(cell_value(grid_, m.data.data(), cell));
        });
        Volume out = conv_gaussian(warped, sig_[oi][0], sig_[oi][1], sig_[oi][2]);
        Volume resid(grid_);
        parallel_for(n, [&](std::int64_t i) {
            resid.data[size_t(i)] = float(double(out.data[size_t(i)]) - double(g_[oi]->data[size_t(i)]));
        });
        loss += block_sum(n, [&](std::int64_t i) {
            const double d = double(resid.data[size_t(i)]);
            return d * d;
        });
        if (!grad) continue;

        parallel_for(n, [&](std::int64_t i) {
            resid.data[size_t(i)] = float(2.0 * double(resid.data[size_t(i)]));
        });
        const Volume c = conv_gaussian_adjoint(resid, sig_[oi][0], sig_[oi][1], sig_[oi][2]);
        // Sensitivity of the warp to the sample position: image gradient of the
        // pre-warp product, evaluated in the same cell the forward value used.
        parallel_for(n, [&](std::int64_t i) {
            const LinCell cell =
                locate_value(grid_, phi.c[0][size_t(i)], phi.c[1][size_t(i)], phi.c[2][size_t(i)]);
            const auto gm = cell_grad(grid_, m.data.data(), cell);
            const double w = double(c.data[size_t(i)]);
            dphi.comp[0][size_t(i)] += float(w * gm[0]);
            dphi.comp[1][size_t(i)] += float(w * gm[1]);
            dphi.comp[2][size_t(i)] += float(w * gm[2]);
        });
    }
    check(std::isfinite(loss), "motion loss non-finite after residual stage");
    if (!grad) return loss;

    // Backward through the squaring chain. phi_{k+1}[r] = I(phi_k)(phi_k[r])
    // contributes through the sample position (J^T, gather) and through the
    // sampled field values (trilinear splat, serial scatter).
    DblField cot(n);
    parallel_for(n, [&](std::int64_t i) {
        cot.c[0][size_t(i)] = double(dphi.comp[0][size_t(i)]);
        cot.c[1][size_t(i)] = double(dphi.comp[1][size_t(i)]);
        cot.c[2][size_t(i)] = double(dphi.comp[2][size_t(i)]);
    });
    DblField next_cot(n);
    std::array<std::vector<double>, 3> splat_acc;
    for (auto& a : splat_acc) a.assign(size_t(n), 0.0);
    for (int s = steps_; s-- > 0;) {
        const DblField& base = phis[size_t(s)];
        if (s != steps_ - 1)
            for (auto& a : splat_acc) std::fill(a.begin(), a.end(), 0.0);

        parallel_for(n, [&](std::int64_t i) {
            const LinCell cell =
                locate_value(grid_, base.c[0][size_t(i)], base.c[1][size_t(i)], base.c[2][size_t(i)]);
            const auto j0 = cell_grad(grid_, base.c[0].data(), cell);
            const auto j1 = cell_grad(grid_, base.c[1].data(), cell);
            const auto j2 = cell_grad(grid_, base.c[2].data(), cell);
            const double c0 = cot.c[0][size_t(i)];
            const double c1 = cot.c[1][size_t(i)];
            const double c2 = cot.c[2][size_t(i)];
            next_cot.c[0][size_t(i)] = j0[0] * c0 + j1[0] * c1 + j2[0] * c2;
            next_cot.c[1][size_t(i)] = j0[1] * c0 + j1[1] * c1 + j2[1] * c2;
            next_cot.c[2][size_t(i)] = j0[2] * c0 + j1[2] * c1 + j2[2] * c2;
        });
        for (std::int64_t i = 0; i < n; ++i) {
            const double x = base.c[0][size_t(i)];
            const double y = base.c[1][size_t(i)];
            const double z = base.c[2][size_t(i)];
            for (int ccomp = 0; ccomp < 3; ++ccomp) {
                const double val = cot.c[size_t(ccomp)][size_t(i)];
                if (val != 0.0) splat_add(grid_, splat_acc[size_t(ccomp)].data(), x, y, z, val);
            }
        }
        parallel_for(n, [&](std::int64_t i) {
            for (int ccomp = 0; ccomp < 3; ++ccomp)
                next_cot.c[size_t(ccomp)][size_t(i)] += splat_acc[size_t(ccomp)][size_t(i)];
        });
        std::swap(cot, next_cot);
    }

    const double inv = 1.0 / double(std::int64_t(1) << steps_);
    *grad = VectorField(grid_);
    parallel_for(n, [&](std::int64_t i) {
        for (int c = 0; c < 3; ++c)
            grad->comp[size_t(c)][size_t(i)] = float(cot.c[size_t(c)][size_t(i)] * inv);
    });
    return loss;
}

MotionGradResult motion_loss_grad(const MotionNet& net, const GridSpec& grid,
                                  const PreparedMotionLoss& loss) {
    const VectorField v = eval_velocity(net, grid);
    VectorField dv;
    MotionGradResult res;
    res.loss = loss.loss_and_velocity_grad(v, &dv);
    check(std::isfinite(res.loss), "motion loss non-finite before MLP backward");

    // Backprop dL/dv into the weights, block by block. Each fixed 2048-voxel
    // block accumulates its own partial gradient; partials are folded in block
    // order so the result is independent of the thread count.
    const std::int64_t n = grid.count();
    const std::int64_t nblocks = (n + kBlockVoxels - 1) / kBlockVoxels;
    const size_t L = net.W.size();
    const size_t nparam = net.param_count();
    std::vector<std::vector<double>> partial;
    partial.resize(size_t(nblocks));
    const float scale = float(net.spec.velocity_scale);

#ifdef _OPENMP
#pragma omp parallel
#endif
    {
        MlpScratch s;
        s.X.resize(size_t(kBlockVoxels) * 3);
        s.D.resize(L);
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
        for (std::int64_t blk = 0; blk < nblocks; ++blk) {
            const std::int64_t lo = blk * kBlockVoxels;
            const std::int64_t hi = lo + kBlockVoxels < n ? lo + kBlockVoxels : n;
            const std::int64_t B = hi - lo;
            fill_coords(grid, lo, hi, s.X.data());
            mlp_block_forward(net, B, s);

            // Output cotangent: dL/dV = s_v * dL/dv
            s.D[L - 1].resize(size_t(B) * 3);
            for (int c = 0; c < 3; ++c)
                for (std::int64_t r = 0; r < B; ++r)
                    s.D[L - 1][size_t(c * B + r)] = float(dv.comp[size_t(c)][size_t(lo + r)]) * scale;

            std::vector<double> grads(nparam, 0.0);
            // Walk layers back, splitting the flat buffer the same way
            // flatten() does: [W0 b0 W1 b1 ...].
            std::vector<size_t> offs(L + 1, 0);
            for (size_t l = 0; l < L; ++l) offs[l + 1] = offs[l] + net.W[l].size() + net.b[l].size();

            for (size_t l = L; l-- > 0;) {
                const int rows = int(net.b[l].size());
                const int cols = l == 0 ? 3 : int(net.b[l - 1].size());
                const float* input = l == 0 ? s.X.data() : s.H[l - 1].data();
                double* gW = grads.data() + offs[l];
                double* gB = gW + size_t(rows) * cols;
                dense_backward_weights(B, rows, cols, s.D[l].data(), input, gW, gB);
                if (l > 0) {
                    s.D[l - 1].resize(size_t(B) * cols);
                    dense_backward_data(B, rows, cols, s.D[l].data(), net.W[l].data(),
                                        s.D[l - 1].data());
                    // tanh'(x) = 1 - tanh(x)^2, using the stored activation
                    const float* h = s.H[l - 1].data();
                    float* d = s.D[l - 1].data();
                    for (std::int64_t i = 0; i < B * cols; ++i) d[i] *= 1.0f - h[i] * h[i];
                }
            }
            partial[size_t(blk)] = std::move(grads);
        }
    }

    res.grad.assign(nparam, 0.0);
    for (const auto& p : partial)
        for (size_t i = 0; i < nparam; ++i) res.grad[i] += p[i];
    return res;
}

}  // namespace invtag
