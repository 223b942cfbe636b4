#pragma once

/**
 * @file parallel.hpp
 * @brief Deterministic index-space parallel loop.
 *
 * Work items are identified by their index; each item derives any randomness
 * it needs from that index, so the result never depends on the number of
 * worker threads or on scheduling order.  Exceptions thrown by work items
 * are captured and rethrown on the calling thread.
 */

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace pcd {

/// Number of worker threads to use: the hardware concurrency, with a floor
/// of 1.
[[nodiscard]] inline unsigned worker_count() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1U : hw;
}

/**
 * @brief Runs body(i) for every i in [0, n), distributing indices over
 * worker threads via a shared atomic counter (chunked to limit contention).
 *
 * The body must be safe to call concurrently for distinct indices.  The
 * first exception thrown by any body call is rethrown here after all
 * threads have joined.
 */
template <typename Body>
void parallel_for(std::size_t n, Body && body, std::size_t chunk = 16) {
    if (n == 0) {
        return;
    }
    const unsigned workers =
        static_cast<unsigned>(std::min<std::size_t>(worker_count(), n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto run = [&]() {
        while (!failed.load(std::memory_order_relaxed)) {
            const std::size_t begin =
                next.fetch_add(chunk, std::memory_order_relaxed);
            if (begin >= n) {
                return;
            }
            const std::size_t end = std::min(begin + chunk, n);
            for (std::size_t i = begin; i < end; ++i) {
                try {
                    body(i);
                } catch (...) {
                    {
                        std::lock_guard<std::mutex> lock(error_mutex);
                        if (!error) {
                            error = std::current_exception();
                        }
                    }
                    failed.store(true, std::memory_order_relaxed);
                    return;
                }
            }
        }
    };

    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        threads.emplace_back(run);
    }
    for (auto & t : threads) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

}  // namespace pcd
