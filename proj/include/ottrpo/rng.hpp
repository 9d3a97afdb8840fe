#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace ottrpo {

namespace detail {
/// SplitMix64 step, used to derive independent child seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace detail

/**
 * Seeded random stream. The engine is std::mt19937_64 (whose sequence is
 * pinned by the standard); the distributions are hand-rolled so that runs are
 * byte-reproducible across standard library implementations.
 *
 * Child streams derived via child(k) are independent of the parent stream and
 * of each other, so e.g. environment noise and evaluation rollouts never
 * perturb one another.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), eng_(detail::splitmix64(seed)) {}

    std::uint64_t seed() const { return seed_; }

    /// Independent stream keyed by (this stream's seed, k).
    Rng child(std::uint64_t k) const {
        return Rng(detail::splitmix64(seed_ ^ (0xd1b54a32d192ed03ULL * (k + 1))));
    }

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (no spare caching, keeps state minimal).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    /// Sample an index from an (unnormalized is fine) non-negative weight row.
    int categorical(std::span<const double> weights) {
        assert(!weights.empty());
        double total = 0.0;
        for (double w : weights) total += w;
        if (!(total > 0.0)) throw std::invalid_argument("categorical: weights sum to zero");
        double u = uniform() * total;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            u -= weights[i];
            if (u < 0.0) return static_cast<int>(i);
        }
        return static_cast<int>(weights.size() - 1);
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 eng_;
};

}  // namespace ottrpo
