#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace semsplat {

/// Runs fn(worker, index) for index in [0, count). Worker w handles indices
/// w, w + workers, w + 2 * workers, ... so the assignment depends only on the
/// worker count. workers <= 1 runs inline on the calling thread.
template <typename Fn>
void parallel_for(int workers, std::size_t count, Fn&& fn) {
    const int n = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(count, 1))));
    if (n == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(0, i);
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n));
    for (int w = 0; w < n; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = static_cast<std::size_t>(w); i < count; i += static_cast<std::size_t>(n)) {
                    fn(w, i);
                }
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

inline int effective_workers(int requested, std::size_t count) {
    return std::max(1, std::min<int>(requested, static_cast<int>(std::max<std::size_t>(count, 1))));
}

} // namespace semsplat
