#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace nilmbound {

/// Resolves a user-facing thread-count request: 0 means "use the hardware".
inline std::size_t resolve_threads(std::size_t requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

/// Runs body(i) for i in [0, count) on up to `threads` workers.
///
/// Work items are claimed from a shared atomic counter, so the split is
/// dynamic but the items themselves must write to disjoint slots; results
/// are then independent of the scheduling. The first exception thrown by
/// any worker is rethrown on the caller's thread.
template <typename Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body) {
    threads = resolve_threads(threads);
    if (count == 0) return;
    if (threads <= 1 || count == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                next.store(count);  // drain remaining work
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    const std::size_t n_workers = std::min(threads, count);
    pool.reserve(n_workers);
    for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    if (first_error) std::rethrow_exception(first_error);
}

/// Deterministic pairwise summation; the result does not depend on how the
/// values were produced (threaded or not), only on their order in `values`.
inline double pairwise_sum(const double* values, std::size_t count) {
    if (count == 0) return 0.0;
    if (count <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < count; ++i) s += values[i];
        return s;
    }
    const std::size_t half = count / 2;
    return pairwise_sum(values, half) + pairwise_sum(values + half, count - half);
}

inline double pairwise_sum(const std::vector<double>& values) {
    return pairwise_sum(values.data(), values.size());
}

}  // namespace nilmbound
