#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <thread>
#include <vector>

namespace robustmsd {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent substream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of substream `index` under `master`. Streams depend only on
/// (master, index), never on how work is scheduled.
constexpr std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return mix64(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t substream_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) noexcept {
    return substream_seed(substream_seed(master, a), b);
}

/// Rows per generation block. Block boundaries fix the random streams, so
/// this constant is part of the reproducibility contract.
inline constexpr std::size_t kBlockRows = 4096;

struct Parallelism {
    unsigned threads = 1;
};

/// Runs fn(block) for block in [0, blocks). Each block writes disjoint state,
/// so results are independent of the thread count.
inline void for_each_block(std::size_t blocks, Parallelism par, const std::function<void(std::size_t)>& fn) {
    const unsigned workers = std::max(1u, std::min<unsigned>(par.threads, static_cast<unsigned>(std::max<std::size_t>(blocks, 1))));
    if (workers <= 1 || blocks <= 1) {
        for (std::size_t b = 0; b < blocks; ++b) fn(b);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t b = w; b < blocks; b += workers) fn(b);
        });
    }
    for (auto& t : pool) t.join();
}

/// Standard normal variates by the polar method. Written out rather than
/// std::normal_distribution so streams are identical across standard libraries.
class NormalSource {
public:
    explicit NormalSource(std::uint64_t seed) : rng_(seed) {}

    double operator()() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

    /// Uniform index in [0, n).
    std::size_t index(std::size_t n) {
        // rejection removes modulo bias
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = rng_();
        } while (x >= limit);
        return static_cast<std::size_t>(x % n);
    }

private:
    Rng rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace robustmsd
