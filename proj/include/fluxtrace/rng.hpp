#pragma once

#include <cmath>
#include <cstdint>

namespace fluxtrace {

/// Deterministic PRNG (xoshiro256++ seeded through splitmix64).
///
/// Hand-rolled so that seeded runs are bit-reproducible across platforms
/// and standard library versions; std::normal_distribution makes no such
/// guarantee.
class Rng {
public:
    explicit Rng(uint64_t seed = 1) { reseed(seed); }

    void reseed(uint64_t seed) {
        uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
        have_gauss_ = false;
    }

    /// Derive an independent stream for a worker; identical results
    /// regardless of scheduling when each trace uses its own index.
    static Rng for_trace(uint64_t master_seed, uint64_t trace_index) {
        uint64_t x = master_seed;
        uint64_t a = splitmix64(x);
        x ^= 0x9e3779b97f4a7c15ULL * (trace_index + 1);
        return Rng(a ^ splitmix64(x));
    }

    uint64_t next_u64() {
        uint64_t* s = state_;
        uint64_t result = rotl(s[0] + s[3], 23) + s[0];
        uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        return result;
    }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

    /// Standard normal via Box-Muller (deterministic pair caching).
    double gauss() {
        if (have_gauss_) {
            have_gauss_ = false;
            return cached_gauss_;
        }
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        cached_gauss_ = r * std::sin(2.0 * 3.14159265358979323846 * u2);
        have_gauss_ = true;
        return r * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    double gauss(double mean, double sigma) { return mean + sigma * gauss(); }

private:
    static uint64_t splitmix64(uint64_t& x) {
        uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    uint64_t state_[4] = {};
    bool have_gauss_ = false;
    double cached_gauss_ = 0.0;
};

} // namespace fluxtrace
