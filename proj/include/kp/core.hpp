#pragma once

// Shared vocabulary: error types, status enums, deterministic RNG and a
// small deterministic parallel loop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace kp {

inline constexpr double inf = std::numeric_limits<double>::infinity();
inline constexpr double pi = 3.14159265358979323846264338327950288;

/// Bad argument (dimension mismatch, parameter outside its range).
struct input_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A documented hypothesis of an operation does not hold for the given data.
struct precondition_error : std::logic_error {
    precondition_error(const std::string& what, long index = -1)
        : std::logic_error(what), index(index) {}
    long index;  // offending state / slice / sequence index, -1 if none
};

/// Value outside the region where a bound is defined (eta >= 1 and friends).
struct domain_error : std::domain_error {
    using std::domain_error::domain_error;
};

/// Numerical procedure could not reach its tolerance within budget.
struct convergence_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class SeriesStatus { converged, truncated, diverging };

inline const char* to_string(SeriesStatus s) {
    switch (s) {
        case SeriesStatus::converged: return "converged";
        case SeriesStatus::truncated: return "truncated";
        case SeriesStatus::diverging: return "diverging";
    }
    return "?";
}

enum class CertificateStatus { valid, invalid, inconclusive, hypothesis_fail };

inline const char* to_string(CertificateStatus s) {
    switch (s) {
        case CertificateStatus::valid: return "VALID";
        case CertificateStatus::invalid: return "INVALID";
        case CertificateStatus::inconclusive: return "INCONCLUSIVE";
        case CertificateStatus::hypothesis_fail: return "HYPOTHESIS_FAIL";
    }
    return "?";
}

/// Value with an absolute error estimate.
struct Estimate {
    double value = 0;
    double error = 0;
    bool converged = true;
};

// ---------------------------------------------------------------------------
// Counter-based random numbers: the i-th draw of stream k under seed s is a
// pure function of (s, k, i), so parallel and serial runs agree bit for bit.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_(splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL))) {}

    std::uint64_t next() { return splitmix64(key_ ^ splitmix64(counter_++)); }

    /// Uniform on [0,1) with 53 random bits.
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    /// Integer in [lo, hi].
    long integer(long lo, long hi) {
        auto span = std::uint64_t(hi - lo + 1);
        return lo + long(next() % span);
    }

    double normal() {
        // Box-Muller; the second variate is discarded to keep draws stateless.
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi * u2);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Radical-inverse Halton point, dimension <= 8.
inline double halton(std::uint64_t index, int dim) {
    static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19};
    const int base = primes[dim % 8];
    double f = 1, r = 0;
    while (index > 0) {
        f /= base;
        r += f * double(index % base);
        index /= base;
    }
    return r;
}

// ---------------------------------------------------------------------------

/// Worker count: hardware concurrency capped by KP_THREADS when set.
inline unsigned worker_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("KP_THREADS")) {
        long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1) n = std::min<unsigned>(n, unsigned(cap));
    }
    return n;
}

/// Calls fn(i) for i in [0, n). Each index is processed exactly once and
/// results must be written to per-index slots, so the outcome does not
/// depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const unsigned workers = std::min<std::size_t>(worker_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_lock;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) fn(i);
            } catch (...) {
                std::lock_guard lock(failure_lock);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace kp
