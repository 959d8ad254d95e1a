#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace csf {

/// Deterministic random stream. Uniform and normal draws are generated from
/// raw engine words (not std::*_distribution) so that streams are
/// bit-reproducible across standard library implementations.
class Rng {
   public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    /// Uniform draw in [0, 1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; one spare value is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    /// Cauchy(0, gamma) via inverse CDF.
    double cauchy(double gamma) {
        return gamma * std::tan(3.14159265358979323846 * (uniform() - 0.5));
    }

    std::vector<double> normal_vec(std::size_t n) {
        std::vector<double> v(n);
        for (auto& x : v) x = normal();
        return v;
    }

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
    }

    /// Splitmix64-style stream derivation; (base, a, b, c) identify a substream
    /// such as (seed, trajectory, step, particle).
    static uint64_t derive(uint64_t base, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
        uint64_t x = base;
        for (uint64_t salt : {a + 0x9e3779b97f4a7c15ull, b + 0xbf58476d1ce4e5b9ull,
                              c + 0x94d049bb133111ebull}) {
            x += salt;
            x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
            x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
            x = x ^ (x >> 31);
        }
        return x;
    }

   private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace csf
