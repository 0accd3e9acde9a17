#pragma once

#include <cstdint>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace madar {

/// Seed mixing for derived streams (splitmix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t state) {
    std::uint64_t z = state + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derive an independent sub-seed from a base seed and a tag. Used so that
/// per-task / per-family draws do not shift when unrelated parts of an
/// experiment change.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    return mix_seed(base ^ (0x517cc1b727220a95ULL * (tag + 1)));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag_a, std::uint64_t tag_b) {
    return derive_seed(derive_seed(base, tag_a), tag_b);
}

/// Deterministic random source. The engine is mt19937_64 (bit-exact by
/// standard); all distributions are implemented here rather than taken from
/// <random>, whose distributions are implementation-defined. Every stochastic
/// component of the library draws through this class so results are stable
/// across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform integer in [0, n). n must be > 0. Unbiased via rejection.
    std::size_t index(std::size_t n) {
        const std::uint64_t span = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        return static_cast<std::size_t>(r % span);
    }

    /// Uniform double in [0, 1) with 53-bit resolution.
    double real01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * real01(); }

    /// Standard normal via Box-Muller; one value cached per pair.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        const double u1 = 1.0 - real01();  // (0, 1]
        const double u2 = real01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(t);
        has_cached_ = true;
        return r * std::cos(t);
    }

    /// In-place Fisher-Yates shuffle.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

    /// k distinct indices drawn uniformly from [0, n), in draw order.
    /// Returns all of [0, n) when k >= n.
    std::vector<std::size_t> pick(std::size_t n, std::size_t k) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        if (k >= n) return idx;
        for (std::size_t i = 0; i < k; ++i) {
            std::swap(idx[i], idx[i + index(n - i)]);
        }
        idx.resize(k);
        return idx;
    }

    Rng fork(std::uint64_t tag) { return Rng(derive_seed(next_u64(), tag)); }

private:
    std::mt19937_64 engine_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace madar
