#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace crackfield {

inline int resolve_thread_count(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs body(i) for i in [begin, end) on `threads` threads. Work is split into
// fixed contiguous chunks independent of the thread count, and each result
// must depend only on its own index, so outputs are identical for any thread
// count. The first exception thrown by any worker is rethrown on the caller.
template <typename Body>
void parallel_for(std::size_t begin, std::size_t end, int threads, Body&& body) {
    const std::size_t n = end > begin ? end - begin : 0;
    if (n == 0) return;
    const int nt = std::min<std::size_t>(resolve_thread_count(threads), n);
    if (nt <= 1) {
        for (std::size_t i = begin; i < end; ++i) body(i);
        return;
    }

    const std::size_t chunk = (n + nt - 1) / nt;
    std::vector<std::thread> pool;
    pool.reserve(nt);
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int t = 0; t < nt; ++t) {
        const std::size_t lo = begin + chunk * static_cast<std::size_t>(t);
        const std::size_t hi = std::min(end, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace crackfield
