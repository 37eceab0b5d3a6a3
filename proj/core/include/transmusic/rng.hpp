#pragma once

#include <complex>
#include <cstdint>

namespace transmusic {

// splitmix64 finalizer (Steele et al. mixing constants).
inline std::uint64_t splitmix64_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t kSplitMixGamma = 0x9E3779B97F4A7C15ULL;

// Seed-derivation function: the seed of sub-stream `index` under `base`.
// Part of the dataset file-format contract (record d is regenerable from
// split_seed(base_seed, d) alone), so the definition must never change.
inline std::uint64_t split_seed(std::uint64_t base, std::uint64_t index) {
    return splitmix64_mix(base + (index + 1) * kSplitMixGamma);
}

// Minimal deterministic 64-bit generator. Identical output on every
// platform, which std::normal_distribution does not guarantee; dataset and
// training reproducibility contracts depend on that.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += kSplitMixGamma;
        return splitmix64_mix(state_);
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // (0, 1], safe as a log() argument
    double uniform_open() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

    // uniform in [lo, hi)
    double uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // unbiased integer in [0, n) by rejection
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (-n) % n; // 2^64 mod n
        std::uint64_t x;
        do {
            x = next();
        } while (x < threshold);
        return x % n;
    }

private:
    std::uint64_t state_;
};

// One CN(0, var) draw: real and imaginary parts independent N(0, var/2).
// Box-Muller on exactly two uniforms keeps the stream position predictable.
inline std::complex<double> complex_gaussian(SplitMix64& rng, double var) {
    const double u1 = rng.uniform_open();
    const double u2 = rng.uniform();
    const double amplitude = std::sqrt(-var * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    return {amplitude * std::cos(angle), amplitude * std::sin(angle)};
}

} // namespace transmusic
