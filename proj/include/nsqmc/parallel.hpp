#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace nsqmc {

/// Worker count: explicit argument > NSQMC_THREADS env > hardware concurrency.
inline int resolve_workers(int requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("NSQMC_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

/// Run fn(i) for i in [0, n). Work items must write only to index-addressed
/// slots so results are identical for any worker count. The first exception
/// thrown by a worker is rethrown on the calling thread.
inline void parallel_for(long n, const std::function<void(long)>& fn,
                         int n_workers = 0) {
    const int workers = std::min<long>(resolve_workers(n_workers), n);
    if (n <= 0) return;
    if (workers <= 1) {
        for (long i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<long> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto body = [&] {
        for (;;) {
            long i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

/// Fixed-order pairwise summation over [first, last). Deterministic for a
/// given element order regardless of how the elements were produced.
inline double pairwise_sum(const double* first, const double* last) {
    const long n = last - first;
    if (n <= 8) {
        double acc = 0.0;
        for (long i = 0; i < n; ++i) acc += first[i];
        return acc;
    }
    const long half = n / 2;
    return pairwise_sum(first, first + half) + pairwise_sum(first + half, last);
}

inline double pairwise_sum(const std::vector<double>& v) {
    return pairwise_sum(v.data(), v.data() + v.size());
}

} // namespace nsqmc
