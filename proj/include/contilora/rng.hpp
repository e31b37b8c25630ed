#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace contilora {

// Deterministic, platform-independent generator (xoshiro256++ seeded via
// splitmix64). std::<distribution> output is implementation-defined, so the
// distributions are implemented here; identical seeds give identical streams
// on every build.
class SeededRng {
public:
    explicit SeededRng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& w : state_) w = splitmix64(x);
    }

    // Independent substream derived from this seed and a purpose tag, so one
    // consumer cannot perturb another's draw sequence.
    static SeededRng derive(uint64_t seed, uint64_t stream) {
        uint64_t x = seed;
        uint64_t a = splitmix64(x);
        x = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
        uint64_t b = splitmix64(x);
        SeededRng r(a ^ (b << 1 | b >> 63));
        return r;
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), n >= 1. Rejection-free modulo bias is
    // negligible for the n used here but we reject anyway for exactness.
    uint64_t uniform_int(uint64_t n) {
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    // Standard normal via Box-Muller; the spare is part of the stream state.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    static uint64_t splitmix64(uint64_t& x) {
        uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    std::array<uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Stream tags for SeededRng::derive. Keeping them in one place guards against
// accidental collisions between consumers.
namespace rng_stream {
inline constexpr uint64_t kAdapterInit = 1;
inline constexpr uint64_t kDataOrder = 2;
inline constexpr uint64_t kDiffusionNoise = 3;
inline constexpr uint64_t kRehearsal = 4;
inline constexpr uint64_t kStrategy = 5;
inline constexpr uint64_t kPretrain = 6;
inline constexpr uint64_t kSuite = 7;
inline constexpr uint64_t kEvalNoise = 8;
}  // namespace rng_stream

}  // namespace contilora
