#pragma once

#include <cmath>
#include <cstdint>
#include <span>

namespace pmgeo {

// SplitMix64. Bit-portable across platforms; used for all seeded sampling so
// that corpora and solver candidate draws reproduce exactly everywhere.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Modulo bias is negligible for n << 2^64 and
    // the mapping is fixed so outputs are reproducible.
    uint64_t uniform_index(uint64_t n) { return n ? next() % n : 0; }

    // Standard normal via Box-Muller.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

private:
    uint64_t state_;
};

// Stateless per-pixel hash: decorrelates a base seed and a pixel index so
// per-pixel draws do not depend on traversal order.
inline uint64_t hash_combine(uint64_t seed, uint64_t index) {
    SplitMix64 rng(seed ^ (0x9e3779b97f4a7c15ULL + index * 0xff51afd7ed558ccdULL));
    return rng.next();
}

// Deterministic pairwise (cascade) summation. Order-independent of thread
// count because it is sequential; pairwise to keep error growth O(log n).
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    size_t half = v.size() / 2;
    return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

}  // namespace pmgeo
