#pragma once

#include <cstdint>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace amv {

// Error taxonomy used across the library. CLI maps input errors to exit
// code 1 and everything else to exit code 2.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct input_error : error {
    using error::error;
};
struct domain_error : error {
    using error::error;
};
struct evaluation_error : error {
    using error::error;
};
struct numeric_error : error {
    using error::error;
};

// Effort contract for ball estimates: stochastic backends stop at whichever
// of (max_evals, target_error) comes first and always report the achieved
// error. mc_sigma_k is the multiple of the sample standard error reported
// as abs_error; it is recorded alongside monte-carlo estimates.
struct EffortBudget {
    std::int64_t max_evals = 400000;
    double target_error = 1e-9;
    double mc_sigma_k = 3.0;
    std::uint64_t seed = 0x51ab1ab5u;
};

// splitmix64: tiny counter-friendly generator. Chosen over std::mt19937_64
// so that sample streams are identical across standard libraries and can be
// re-derived per chunk index (bitwise-deterministic parallel reductions).
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // uniform in [0,1)
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform in [a,b)
    double uniform(double a, double b) { return a + (b - a) * next_double(); }
};

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    SplitMix64 g(a ^ (0x9E3779B97F4A7C15ull + (b << 6) + (b >> 2)));
    g.next_u64();
    return g.next_u64();
}

inline std::uint64_t hash_double(double x) {
    std::uint64_t u;
    static_assert(sizeof(double) == sizeof(std::uint64_t));
    __builtin_memcpy(&u, &x, sizeof(u));
    return u;
}

// Worker cap: AMV_THREADS wins over hardware_concurrency.
inline unsigned thread_count() {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("AMV_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1 && v < 1024) return static_cast<unsigned>(v);
    }
    return hw;
}

// Runs fn(i) for i in [0,n) on up to thread_count() workers. Callers store
// results indexed by i and combine them in index order, so the outcome does
// not depend on the thread count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    unsigned workers = thread_count();
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t stripe = workers;
    pool.reserve(stripe);
    for (std::size_t w = 0; w < stripe; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += stripe) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

inline constexpr double pi() { return 3.14159265358979323846264338327950288; }

// volume of the unit ball in R^n, n = 1,2,3
inline double unit_ball_volume(int n) {
    switch (n) {
        case 1: return 2.0;
        case 2: return pi();
        case 3: return 4.0 * pi() / 3.0;
        default: throw input_error("unit_ball_volume: unsupported dimension " + std::to_string(n));
    }
}

}  // namespace amv
