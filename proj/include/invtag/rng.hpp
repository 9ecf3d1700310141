#pragma once

#include <cmath>
#include <cstdint>

namespace invtag {

/// Counter-based RNG: draw i is a pure function of (key, i), so streams can be
/// split by key and replayed independently of call sites or thread layout.
struct Rng {
    std::uint64_t key = 0;
    std::uint64_t ctr = 0;

    explicit Rng(std::uint64_t k = 0) : key(k) {}

    static std::uint64_t mix(std::uint64_t x) {
        // splitmix64 finalizer
        x += 0x9E3779B97F4A7C15ull;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
        return x ^ (x >> 31);
    }

    /// Derive an independent stream. Tags are small integers or hashes of
    /// stage names; derivation is associative enough for (seed, stage, index).
    Rng sub(std::uint64_t tag) const { return Rng(mix(key ^ mix(tag + 0x632BE59BD9B4E019ull))); }

    std::uint64_t next_u64() { return mix(key + 0x9E3779B97F4A7C15ull * ++ctr); }

    /// Uniform in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    /// Standard normal by Box-Muller; consumes exactly two uniforms per draw
    /// (no caching) so the draw order is a fixed function of the counter.
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
};

}  // namespace invtag
