#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace driftguard {

// Stateless keyed random numbers: each draw is a pure function of
// (seed, stream, counters), so evaluation order never changes results and the
// output is identical on every platform (no std::*_distribution involved).
namespace counter_rng {

inline constexpr std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t hash(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                    std::uint64_t c = 0, std::uint64_t d = 0) {
    std::uint64_t h = mix(seed);
    h = mix(h ^ a);
    h = mix(h ^ b);
    h = mix(h ^ c);
    h = mix(h ^ d);
    return h;
}

// Uniform in (0, 1); never returns exactly 0 or 1.
inline double to_unit(std::uint64_t bits) {
    return (static_cast<double>(bits >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

inline double uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                      std::uint64_t c = 0, std::uint64_t d = 0) {
    return to_unit(hash(seed, a, b, c, d));
}

// Standard normal via Box-Muller on two independent keyed uniforms.
inline double gaussian(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                       std::uint64_t c = 0, std::uint64_t d = 0) {
    const std::uint64_t h = hash(seed, a, b, c, d);
    const double u1 = to_unit(h);
    const double u2 = to_unit(mix(h ^ 0x5851f42d4c957f2dULL));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace counter_rng

// Sequential generator built on the same mixer, for code that just needs a
// reproducible stream (seeding, sampling).
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double uniform() { return counter_rng::to_unit(next()); }
    // Uniform integer in [0, n) by rejection, n >= 1.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = ~0ULL - (~0ULL % n);
        std::uint64_t v;
        do {
            v = next();
        } while (v >= limit);
        return v % n;
    }

private:
    std::uint64_t state_;
};

}  // namespace driftguard
