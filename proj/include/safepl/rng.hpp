// Portable seeded random numbers.
//
// Engine: std::mt19937_64, whose output sequence is fixed by the standard.
// The distributions are written out here (the std:: ones are
// implementation-defined) so every draw is identical across platforms:
//   uniform    53 high bits of one engine word, scaled to [0,1)
//   normal     Box-Muller on two uniforms, second value cached
//   integer    rejection sampling on engine words
// Substream seeds are derived with splitmix64.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace safepl::sim {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Independent stream for (seed, index).
    static Rng substream(std::uint64_t seed, std::uint64_t index) {
        return Rng(splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632BE59BD9B4E019ull)));
    }

    std::uint64_t next() { return engine_(); }

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v;
        do v = engine_();
        while (v >= limit);
        return v % n;
    }

    /// +1 or -1 with equal probability.
    int sign() { return (engine_() >> 63) ? 1 : -1; }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace safepl::sim
