#pragma once

namespace invtag {

/// Rational tanh approximation (13th/6th-order Pade split, the form used by
/// several SIMD math libraries), accurate to ~1 ulp in f32 over the clamped
/// range. Plain arithmetic, so activation loops vectorize where a libm call
/// would serialize.
inline float fast_tanhf(float x) {
    const float kClamp = 7.90531110763549805f;
    x = x < -kClamp ? -kClamp : (x > kClamp ? kClamp : x);
    const float x2 = x * x;
    float p = -2.76076847742355e-16f;
    p = 2.00018790482477e-13f + x2 * p;
    p = -8.60467152213735e-11f + x2 * p;
    p = 5.12229709037114e-08f + x2 * p;
    p = 1.48572235717979e-05f + x2 * p;
    p = 6.37261928875436e-04f + x2 * p;
    p = 4.89352455891786e-03f + x2 * p;
    const float num = x * p;
    float q = 1.19825839466702e-06f;
    q = 1.18534705686654e-04f + x2 * q;
    q = 2.26843463243900e-03f + x2 * q;
    q = 4.89352518554385e-03f + x2 * q;
    return num / q;
}

}  // namespace invtag
