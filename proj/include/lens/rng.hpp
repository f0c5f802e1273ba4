#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string_view>
#include <vector>

namespace lens {

// Deterministic RNG with hand-rolled distributions. std:: distributions are
// implementation-defined, which would break the byte-identical-output
// contract across toolchains, so all sampling goes through this.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ^ 0x9e3779b97f4a7c15ULL) {
        // warm up so nearby seeds decorrelate
        next_u64();
        next_u64();
    }

    uint64_t next_u64() {
        // splitmix64
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // uniform integer in [lo, hi] inclusive
    int64_t uniform_int(int64_t lo, int64_t hi) {
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int64_t>(next_u64() % span);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    double normal(double mean = 0.0, double stddev = 1.0) {
        // Box-Muller, one value per call (no cached spare, keeps state simple)
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 1e-300) u1 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * M_PI * u2);
    }

    // Knuth's method; fine for the small per-slice rates used here
    int poisson(double mean) {
        if (mean <= 0.0) return 0;
        double l = std::exp(-mean);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform01();
        } while (p > l);
        return k - 1;
    }

    // k distinct indices from [0, n), ascending order
    std::vector<size_t> sample_without_replacement(size_t n, size_t k) {
        std::vector<size_t> pool(n);
        std::iota(pool.begin(), pool.end(), size_t{0});
        if (k > n) k = n;
        for (size_t i = 0; i < k; ++i) {
            size_t j = i + static_cast<size_t>(next_u64() % (n - i));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(k);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

private:
    uint64_t state_;
};

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Stable per-stage / per-volume seed derivation.
inline uint64_t derive_seed(uint64_t master, std::string_view tag) {
    uint64_t z = master ^ (fnv1a64(tag) + 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace lens
