#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace ndtrace {

inline int default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

/// out[i] = fn(i) for i < n on up to `threads` workers, results in index
/// order. The exception from the lowest failing index is rethrown.
template <class T, class F>
std::vector<T> parallel_map(int n, int threads, F&& fn) {
    std::vector<T> out(n);
    std::vector<std::exception_ptr> errs(n);
    std::atomic<int> next{0};
    auto work = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                out[i] = fn(i);
            } catch (...) {
                errs[i] = std::current_exception();
            }
        }
    };
    const int t = std::clamp(threads <= 0 ? default_threads() : threads, 1, std::max(1, n));
    if (t == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < t; ++k) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
    return out;
}

}  // namespace ndtrace
