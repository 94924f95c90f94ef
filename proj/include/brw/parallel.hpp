#pragma once

// Replica-level parallelism: a shared atomic index over the replica range,
// workers pulling the next free replica. Each replica writes only its own
// slot, so results are identical for any thread count.

#include <atomic>
#include <thread>
#include <vector>
#include <functional>
#include <cstdlib>
#include <exception>
#include <mutex>

namespace brw {

inline int resolve_threads(int max_threads) {
    if (max_threads > 0) return max_threads;
    if (const char* env = std::getenv("RSBM_THREADS")) {
        int t = std::atoi(env);
        if (t > 0) return t;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? int(hw) : 1;
}

template <typename Fn>
void run_replicas(int count, int threads, Fn&& fn) {
    threads = std::min(resolve_threads(threads), count);
    if (threads <= 1) {
        for (int r = 0; r < count; ++r) fn(r);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    auto worker = [&]() {
        for (;;) {
            int r = next.fetch_add(1);
            if (r >= count) return;
            try {
                fn(r);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace brw
