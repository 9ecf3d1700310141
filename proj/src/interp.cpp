#include "invtag/interp.hpp"

#include <cmath>

#include "invtag/error.hpp"

namespace invtag {

namespace {
void check_point(const std::array<double, 3>& p, size_t idx) {
    check(std::isfinite(p[0]) && std::isfinite(p[1]) && std::isfinite(p[2]),
          "non-finite sample point at index %zu: (%g, %g, %g)", idx, p[0], p[1], p[2]);
}
}  // namespace

std::vector<double> sample_trilinear(const Volume& v, std::span<const std::array<double, 3>> pts) {
    std::vector<double> out(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
        check_point(pts[i], i);
        out[i] = sample_trilinear_at(v, pts[i][0], pts[i][1], pts[i][2]);
    }
    return out;
}

std::vector<std::array<double, 3>> sample_trilinear_grad(const Volume& v,
                                                         std::span<const std::array<double, 3>> pts) {
    std::vector<std::array<double, 3>> out(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
        check_point(pts[i], i);
        out[i] = sample_trilinear_grad_at(v, pts[i][0], pts[i][1], pts[i][2]);
    }
    return out;
}

}  // namespace invtag
