#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace mms {

namespace detail {
inline int& thread_count_ref() {
    static int n = 0;  // 0 = not yet resolved
    return n;
}
}  // namespace detail

inline void set_threads(int n) { detail::thread_count_ref() = std::max(1, n); }

inline int thread_count() {
    int& n = detail::thread_count_ref();
    if (n == 0) {
        if (const char* env = std::getenv("MMS_THREADS")) {
            n = std::max(1, std::atoi(env));
        } else {
            n = std::max(1u, std::thread::hardware_concurrency());
        }
    }
    return n;
}

/// Runs fn(i) for i in [0, n). Each index writes only to its own slots, so the
/// result is identical for any thread count; reductions happen afterwards in
/// index order.
template <typename F>
void parallel_for(std::size_t n, F&& fn) {
    int threads = thread_count();
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::size_t nt = std::min<std::size_t>(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += nt) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace mms
