#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace idtrack {

// Seeded RNG with a fixed draw schedule. Gaussians use Box-Muller without
// pair caching so every call consumes exactly two uniforms; this keeps the
// draw sequence replayable by oracle tests.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Uniform in [0, 1).
    double uniform() {
        return (gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Uniform integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(gen_() % span);
    }

    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double gaussian(double sigma) { return sigma * gaussian(); }

    bool bernoulli(double p) { return uniform() < p; }

    int poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        // Knuth's method; lambdas here are small (false-positive rates).
        double l = std::exp(-lambda);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > l);
        return k - 1;
    }

    std::uint64_t raw() { return gen_(); }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

}  // namespace idtrack
