#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace fedhpo {

/// SplitMix64 finalizer. Used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// FNV-1a over a label, so streams can be named ("partition", "init", ...).
constexpr std::uint64_t hash_label(std::string_view label) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Derives a child seed from a parent seed and a path of integers.
/// hash(seed, round, client) style derivation keeps streams independent of
/// execution order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t h = mix64(seed);
    for (auto p : path) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label,
                                 std::initializer_list<std::uint64_t> path = {}) noexcept {
    std::uint64_t h = derive_seed(seed, {hash_label(label)});
    for (auto p : path) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
    return h;
}

/// Seeded random stream.
///
/// Wraps std::mt19937_64 (whose output sequence is fixed by the standard) and
/// implements the derived distributions itself, so draws are bit-identical
/// across standard library implementations.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer on [0, n). Rejection sampling removes modulo bias.
    std::size_t uniform_index(std::size_t n) {
        if (n <= 1) return 0;
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return static_cast<std::size_t>(x % bound);
    }

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Gamma(shape, 1) by Marsaglia-Tsang, with the U^(1/shape) boost for shape < 1.
    double gamma(double shape) {
        if (shape < 1.0) {
            const double g = gamma(shape + 1.0);
            double u;
            do {
                u = uniform01();
            } while (u <= 0.0);
            return g * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform01();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    /// Symmetric Dirichlet(alpha) over k categories.
    std::vector<double> dirichlet(double alpha, std::size_t k) {
        std::vector<double> p(k);
        double total = 0.0;
        for (auto& x : p) {
            x = gamma(alpha);
            total += x;
        }
        if (!(total > 0.0) || !std::isfinite(total)) {
            // Every draw underflowed: all mass goes to one category.
            std::fill(p.begin(), p.end(), 0.0);
            p[uniform_index(k)] = 1.0;
            return p;
        }
        for (auto& x : p) x /= total;
        return p;
    }

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = uniform_index(i);
            std::swap(items[i - 1], items[j]);
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        shuffle(std::span<T>(items));
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace fedhpo
