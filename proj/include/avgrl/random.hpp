#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace avgrl {

/// SplitMix64 finalizer (Steele, Lea & Flood). Used only to derive seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Named sub-streams of a run seed. A run seed s feeds the environment with
/// derive_seed(s, kEnvironmentStream) and the agent with
/// derive_seed(s, kAgentStream); the streams never share engine state.
enum : std::uint64_t {
    kEnvironmentStream = 1,
    kAgentStream = 2,
    kBuildStream = 3,
};

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream));
}

/// mt19937_64 engine plus the handful of draws this project needs.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::size_t index(std::size_t n) {
        std::uniform_int_distribution<std::size_t> dist(0, n - 1);
        return dist(engine_);
    }

    double normal() { return std::normal_distribution<double>{}(engine_); }

    /// Exp(1) by inversion.
    double exponential() { return -std::log1p(-uniform()); }

    /// Draws an index with the given probabilities (assumed to sum to ~1).
    std::size_t categorical(std::span<const double> probs) {
        const double u = uniform();
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return i;
        }
        // u landed in the rounding gap above the cumulative sum.
        for (std::size_t i = probs.size(); i-- > 0;) {
            if (probs[i] > 0.0) return i;
        }
        return 0;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

} // namespace avgrl
