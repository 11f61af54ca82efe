#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

namespace switchback {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derive a stream seed from a base seed and one or more stream ids. Used to
// give every replication / interval / component its own independent stream.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t id) {
    std::uint64_t s = base ^ (0x8e9bcd85a1f4a7c1ULL + id * 0xd1342543de82ef95ULL);
    splitmix64(s);
    return splitmix64(s);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t id1, std::uint64_t id2) {
    return derive_seed(derive_seed(base, id1), id2);
}

// mt19937_64 core with hand-rolled distribution transforms so that streams are
// reproducible bit-for-bit across standard library implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // uniform on [0, 1)
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    std::size_t uniform_index(std::size_t n) {
        // rejection-free modulo bias is negligible for n << 2^64, but keep exact
        if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
        std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / n * n;
        std::uint64_t x;
        do { x = gen_(); } while (x >= limit);
        return static_cast<std::size_t>(x % n);
    }

    // Box-Muller with caching
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do { u1 = uniform01(); } while (u1 <= 0.0);
        u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Knuth product method below the crossover, normal approximation with
    // Poisson correction (PTRS-style rejection) above it.
    long poisson(double lambda) {
        if (lambda < 0.0) throw std::invalid_argument("poisson: lambda must be nonnegative");
        if (lambda == 0.0) return 0;
        if (lambda < 30.0) {
            const double limit = std::exp(-lambda);
            long k = 0;
            double prod = uniform01();
            while (prod > limit) {
                ++k;
                prod *= uniform01();
            }
            return k;
        }
        // transformed rejection (Hoermann's PTRS)
        const double b = 0.931 + 2.53 * std::sqrt(lambda);
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double vr = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            double u = uniform01() - 0.5;
            double v = uniform01();
            double us = 0.5 - std::fabs(u);
            long k = static_cast<long>(std::floor((2.0 * a / us + b) * u + lambda + 0.43));
            if (us >= 0.07 && v <= vr) return k;
            if (k < 0 || (us < 0.013 && v > us)) continue;
            double lfact = std::lgamma(static_cast<double>(k) + 1.0);
            if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
                k * std::log(lambda) - lambda - lfact)
                return k;
        }
    }

  private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Runs fn(i) for i in [0, n). Tasks are indexed so results can be written to
// preallocated slots; aggregation order is then independent of scheduling.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    int use = std::min<int>(threads, static_cast<int>(n));
    pool.reserve(use);
    for (int t = 0; t < use; ++t) {
        pool.emplace_back([&]() {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n) break;
                fn(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace switchback
