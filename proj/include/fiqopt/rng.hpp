#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <string_view>
#include <vector>

// Deterministic randomness substrate. Every stochastic stage of the pipeline
// draws through the Rng wrapper below, and sub-streams are derived with
// derive_seed / fnv1a64 so that results are reproducible bit-for-bit for a
// given seed, independent of thread count or platform.

namespace fiqopt {

inline constexpr std::uint64_t kFnvOffset64 = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime64 = 1099511628211ull;

// 64-bit FNV-1a over a byte string. Used to salt per-identity seeds and to
// digest input files for run manifests.
constexpr std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = kFnvOffset64;
    for (char c : data) {
        h ^= static_cast<unsigned char>(c);
        h *= kFnvPrime64;
    }
    return h;
}

// Incremental FNV-1a for streaming file digests.
class Fnv1a64 {
public:
    void update(const char* data, std::size_t len) {
        for (std::size_t i = 0; i < len; ++i) {
            state_ ^= static_cast<unsigned char>(data[i]);
            state_ *= kFnvPrime64;
        }
    }
    std::uint64_t digest() const { return state_; }

private:
    std::uint64_t state_ = kFnvOffset64;
};

// splitmix64 finalizer; the standard constants.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Deterministic sub-seed for stream `salt` of a parent seed. Every derived
// stream in the pipeline is produced through this one function.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    return splitmix64(seed + 0x9E3779B97F4A7C15ull * salt);
}

// Deterministic random stream with a fixed draw protocol. mt19937_64 keeps
// the raw stream identical across platforms; the mappings below are part of
// the reproducibility contract:
//
//   next()      one raw 64-bit draw
//   bounded(n)  Lemire multiply-shift rejection; consumes >= 1 draw
//   uniform()   (next() >> 11) * 2^-53, in [0, 1)
//   gaussian()  Box-Muller, exactly two draws per call, no caching:
//               u1 = ((next() >> 11) + 1) * 2^-53   in (0, 1]
//               u2 = (next() >> 11) * 2^-53
//               z  = sqrt(-2 ln u1) * cos(2 pi u2)
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    // Uniform integer in [0, n). n must be positive.
    std::uint64_t bounded(std::uint64_t n) {
        unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            const std::uint64_t t = (0 - n) % n;
            while (lo < t) {
                m = static_cast<unsigned __int128>(next()) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal deviate.
    double gaussian() {
        const double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
        const double u2 = static_cast<double>(next() >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 gen_;
};

// k distinct indices out of [0, n), in draw order, via partial Fisher-Yates:
// for i in [0, k), j = i + bounded(n - i), swap idx[i] and idx[j]. Exactly k
// bounded() calls.
inline std::vector<std::size_t> sample_distinct(Rng& rng, std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (k > n) k = n;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.bounded(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

}  // namespace fiqopt
