#pragma once

#include <cstdint>
#include <cmath>

namespace p2f {

// Counter-based splitmix generator. Every stream is fully determined by the
// 64-bit key it was constructed with, so datasets and training runs replay
// bit-identically across platforms.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform in [0, n). Modulo bias is below 2^-53 for any n we use.
    std::uint64_t next_below(std::uint64_t n) { return next() % n; }

    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Box-Muller; draws two uniforms per call, no cached state.
    double next_gaussian() {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

private:
    std::uint64_t state_;
};

// Derives an independent stream key from a base seed and up to three indices
// (split id, image index, attempt counter, ...).
inline std::uint64_t derive_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                std::uint64_t c = 0) {
    SplitMix64 m(seed);
    std::uint64_t k = m.next();
    k ^= a * 0xD1B54A32D192ED03ull;
    SplitMix64 m2(k);
    k = m2.next() ^ (b * 0x8CB92BA72F3D8DD7ull);
    SplitMix64 m3(k);
    return m3.next() ^ (c * 0xA24BAED4963EE407ull);
}

}  // namespace p2f
