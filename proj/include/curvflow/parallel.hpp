#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace curvflow {

/// Worker count: CURVFLOW_THREADS when set to a positive integer, else the hardware concurrency.
inline unsigned thread_count() {
    if (const char* env = std::getenv("CURVFLOW_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls body(begin, end, chunk) over a fixed partition of [0, count) into `chunks` pieces.
/// The partition does not depend on the thread count, so per-chunk seeding is reproducible.
template <class Body>
void parallel_chunks(std::size_t count, std::size_t chunks, Body&& body) {
    if (count == 0) return;
    chunks = std::max<std::size_t>(1, std::min(chunks, count));
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_count(), chunks));
    auto range = [&](std::size_t c) {
        return std::pair{c * count / chunks, (c + 1) * count / chunks};
    };
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) {
            const auto [b, e] = range(c);
            body(b, e, c);
        }
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t c = w; c < chunks; c += workers) {
                try {
                    const auto [b, e] = range(c);
                    body(b, e, c);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

/// Calls fn(i) for every i in [0, count); fn must only write to slot i.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
    parallel_chunks(count, thread_count(), [&](std::size_t b, std::size_t e, std::size_t) {
        for (std::size_t i = b; i < e; ++i) fn(i);
    });
}

/// Seed for chunk `chunk` of a computation seeded with `seed` (splitmix64).
inline std::uint64_t chunk_seed(std::uint64_t seed, std::size_t chunk) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(chunk) + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace curvflow
