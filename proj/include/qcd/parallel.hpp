#pragma once

#include <atomic>
#include <cstdint>
#include <thread>
#include <vector>

namespace qcd::parallel {

// Worker count used by the trial loops. 0 = hardware concurrency.
inline std::atomic<unsigned>& max_threads_slot() {
    static std::atomic<unsigned> n{0};
    return n;
}
inline void set_max_threads(unsigned n) { max_threads_slot().store(n); }
inline unsigned resolved_threads(std::uint64_t jobs) {
    unsigned n = max_threads_slot().load();
    if (n == 0) n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
    if (jobs < n) n = static_cast<unsigned>(jobs);
    return n == 0 ? 1 : n;
}

// Runs body(i) for i in [0, jobs). Each index does its own independent work
// (results land in caller-owned slots keyed by i), so the outcome is identical
// for any thread count or scheduling order.
template <typename Body>
void for_each_index(std::uint64_t jobs, Body&& body) {
    const unsigned threads = resolved_threads(jobs);
    if (threads <= 1) {
        for (std::uint64_t i = 0; i < jobs; ++i) body(i);
        return;
    }
    std::atomic<std::uint64_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::uint64_t i = next.fetch_add(1);
                if (i >= jobs) return;
                body(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace qcd::parallel
