#ifndef SURPLUS_COMMON_HPP
#define SURPLUS_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace surplus {

// Data/estimation degeneracy (zero-variance prices, empty overlap region, ...).
// Distinct from std::invalid_argument so callers can map it to its own exit code.
class DegenerateDataError : public std::runtime_error {
public:
    explicit DegenerateDataError(const std::string& what) : std::runtime_error(what) {}
};

inline double clamp01(double v) {
    if (v < 0.0) return 0.0;
    if (v > 1.0) return 1.0;
    return v;
}

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// Pairwise (cascade) summation: accumulation error grows O(log n) instead of
// O(n), which keeps row-permutation drift below the 1e-12 contract.
inline double pairwise_sum(std::span<const double> v) {
    const size_t n = v.size();
    if (n <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const size_t half = n / 2;
    return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

inline double pairwise_mean(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("mean of empty vector");
    return pairwise_sum(v) / static_cast<double>(v.size());
}

// splitmix64: seed mixer used to derive independent per-task streams from one
// master seed.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t master, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    uint64_t s = master;
    uint64_t z = splitmix64(s);
    s ^= z + a;
    z = splitmix64(s);
    s ^= z + b;
    z = splitmix64(s);
    s ^= z + c;
    return splitmix64(s);
}

// Deterministic RNG wrapper. Uniform variates are built from raw mt19937_64
// bits rather than std::uniform_real_distribution so that streams do not
// depend on the standard library implementation.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ^ 0xA5A5A5A55A5A5A5AULL) {
        // scramble the seed once so small consecutive seeds do not start
        // mt19937_64 in correlated states
        uint64_t s = seed;
        state_ = splitmix64(s);
        gen_seed_ = splitmix64(s);
        x_ = gen_seed_ | 1ULL;
    }

    uint64_t next_u64() {
        // xorshift* over a splitmix-initialized state: small, portable, fast
        x_ ^= x_ >> 12;
        x_ ^= x_ << 25;
        x_ ^= x_ >> 27;
        return x_ * 0x2545F4914F6CDD1DULL;
    }

    // uniform on [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer on [0, n)
    int uniform_int(int n) {
        if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
        // rejection sampling to avoid modulo bias
        const uint64_t un = static_cast<uint64_t>(n);
        const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        return static_cast<int>(r % un);
    }

    // standard normal via Box-Muller (only used by the synthetic-data generator)
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    uint64_t state_ = 0;
    uint64_t gen_seed_ = 0;
    uint64_t x_ = 1;
};

}  // namespace surplus

#endif
