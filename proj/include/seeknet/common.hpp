#pragma once

// Shared infrastructure: error taxonomy, deterministic RNG, bounded thread pool.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace seeknet {

// ---------------------------------------------------------------------------
// Errors. The CLI maps these onto distinct exit codes (config=2, format=3,
// everything else=4), so keep the taxonomy stable.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad numeric input to an operation (out-of-domain sigma, degenerate box, ...).
struct DomainError : Error {
    using Error::Error;
};

// Tensor/map dimensions do not line up.
struct ShapeError : Error {
    using Error::Error;
};

// User-supplied configuration is unusable (missing file, incompatible dims).
struct ConfigError : Error {
    using Error::Error;
};

// On-disk data violates its schema (corrupt checkpoint, truncated file).
struct FormatError : Error {
    using Error::Error;
};

// Scenario placement could not be satisfied within the retry budget.
struct GenerationError : Error {
    using Error::Error;
};

// Non-finite values appeared where finite math was required.
struct NumericError : Error {
    using Error::Error;
};

// Planner invoked from an invalid start state.
struct PlanningError : Error {
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Deterministic RNG.
//
// All stochastic behaviour in the library flows through Rng so that runs are
// reproducible bit-for-bit across platforms. std::mt19937_64 output is
// standardized; the uniform/gaussian mappings below are pinned here instead
// of relying on std::*_distribution, whose algorithms are
// implementation-defined.
// ---------------------------------------------------------------------------

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(uint64_t seed = 0) : engine_(splitmix64(seed)) {}

    // Independent child stream; (seed, stream) pairs never collide in practice.
    static Rng stream(uint64_t seed, uint64_t stream_id) {
        return Rng(splitmix64(seed) ^ splitmix64(splitmix64(stream_id) + 0x632be59bd9b4e019ull));
    }

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Multiply-shift; slight modulo bias is
    // irrelevant at 64 bits and keeps the draw count fixed.
    uint64_t uniform_index(uint64_t n) {
        return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    // Box-Muller with cached spare.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // Avoid log(0).
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double mag = std::sqrt(-2.0 * std::log(u1));
        const double two_pi = 6.283185307179586476925286766559;
        spare_ = mag * std::sin(two_pi * u2);
        has_spare_ = true;
        return mag * std::cos(two_pi * u2);
    }

    double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Parallel fan-out capped by SEEKNET_THREADS. Results must be written to
// per-index slots by the caller; chunk order is fixed so reductions stay
// deterministic regardless of thread timing.
// ---------------------------------------------------------------------------

inline int max_threads() {
    if (const char* env = std::getenv("SEEKNET_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<int>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

inline void parallel_for(int n, const std::function<void(int)>& fn) {
    const int threads = std::min(max_threads(), n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (int i = t; i < n; i += threads) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace seeknet
