#pragma once

#include <cmath>
#include <cstdint>

namespace ecgi {

// Counter-based random numbers: every stream is keyed by a handful of integers
// (seed, phase, step, index) so that parallel runs are reproducible no matter
// how work is scheduled. The generator is splitmix64; distributions are
// hand-rolled so results do not depend on the standard library implementation.

inline std::uint64_t fmix64(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ULL;
    x ^= x >> 33;
    return x;
}

inline std::uint64_t mix_key(std::uint64_t a, std::uint64_t b) {
    return fmix64(a + 0x9e3779b97f4a7c15ULL * (b + 0x632be59bd9b4e019ULL));
}

class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : state_(seed) {}

    /// Derive an independent stream from (seed, phase, step, index).
    static RngStream derive(std::uint64_t seed, std::uint64_t phase, std::uint64_t step = 0,
                            std::uint64_t index = 0) {
        std::uint64_t k = mix_key(seed, phase);
        k = mix_key(k, step);
        k = mix_key(k, index);
        return RngStream(k);
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return fmix64(state_);
    }

    /// Uniform on [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (cosine branch).
    double normal() {
        const double u1 = 1.0 - uniform01(); // (0, 1]
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    /// Exponential with the given mean (inversion).
    double exponential(double mean) { return -mean * std::log(1.0 - uniform01()); }

    /// Unbiased integer in [0, n), n >= 1.
    std::uint64_t uniform_below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

private:
    std::uint64_t state_;
};

// Stream phases used across the filter and data generation.
namespace rng_phase {
inline constexpr std::uint64_t init = 0x10;
inline constexpr std::uint64_t predict = 0x20;
inline constexpr std::uint64_t resample = 0x30;
inline constexpr std::uint64_t noise = 0x40;
} // namespace rng_phase

} // namespace ecgi
