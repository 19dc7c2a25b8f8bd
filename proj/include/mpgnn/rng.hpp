#pragma once

#include <cstdint>

namespace mpgnn {

/// SplitMix64 finalizer. Bijective scramble of a 64-bit word.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

/// Minimal counter-based generator. All randomness in the project flows
/// through this type so that results are bit-identical across platforms
/// and independent of library implementations of distributions.
struct SplitMix64 {
    std::uint64_t state;

    explicit constexpr SplitMix64(std::uint64_t seed) : state(seed) {}

    constexpr std::uint64_t next() {
        state += 0x9E3779B97F4A7C15ull;
        return mix64(state);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return n ? next() % n : 0; }
};

/// Derives a substream seed from a master seed and up to three stream ids.
/// Equal inputs give equal streams; any difference decorrelates the stream,
/// so trials, replicates and layers can be seeded independently and the
/// result does not depend on evaluation order.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                    std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t h = mix64(master ^ 0x9E3779B97F4A7C15ull);
    h = mix64(h ^ mix64(a + 0xD1B54A32D192ED03ull));
    h = mix64(h ^ mix64(b + 0x8CB92BA72F3D8DD7ull));
    h = mix64(h ^ mix64(c + 0xA24BAED4963EE407ull));
    return h;
}

/// Fixed stream ids, one per consumer of randomness.
namespace stream {
inline constexpr std::uint64_t kNetLayer = 1;
inline constexpr std::uint64_t kInputMap = 2;
inline constexpr std::uint64_t kTrialLatents = 3;
inline constexpr std::uint64_t kQuadrature = 4;
inline constexpr std::uint64_t kEstimator = 5;
inline constexpr std::uint64_t kSuite = 6;
inline constexpr std::uint64_t kCoefficient = 7;
}  // namespace stream

}  // namespace mpgnn
