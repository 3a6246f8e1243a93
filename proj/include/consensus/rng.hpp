#pragma once

#include <cstdint>
#include <random>

namespace consensus {

// Seeded random stream with portable, platform-independent output.
//
// std::mt19937_64 output is fully specified by the standard; uniform doubles
// are produced from the top 53 bits instead of std::uniform_real_distribution
// (whose draw sequence is implementation-defined). Independent streams are
// derived from a root seed by stream index so that e.g. Monte Carlo trials
// stay reproducible and independent no matter how they are scheduled.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(mix(mix(seed) + 1)) {}

    static RandomStream derived(std::uint64_t root_seed, std::uint64_t stream_index) {
        return RandomStream(mix(root_seed) ^ mix(stream_index + 0x632be59bd9b4e019ULL));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53-bit resolution.
    double next_double() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return next_double() < p; }

    // Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform integer in [0, bound), bound >= 1. Rejection-free modulo use is
    // fine here: bound is tiny compared to 2^64 in every caller.
    std::uint64_t below(std::uint64_t bound) { return engine_() % bound; }

private:
    // SplitMix64 finalizer; decorrelates nearby seeds.
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
};

} // namespace consensus
