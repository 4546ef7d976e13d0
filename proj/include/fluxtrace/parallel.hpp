#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace fluxtrace {

/// Index-parallel map over [0, n). Each index must be independent (the
/// Monte Carlo paths key their noise off the trace index, so results do
/// not depend on the schedule).
template <typename Fn>
void parallel_for_index(std::size_t n, Fn&& fn) {
    unsigned hw = std::thread::hardware_concurrency();
    std::size_t n_threads = hw ? hw : 1;
    if (n_threads <= 1 || n < 2 * n_threads) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) {
        pool.emplace_back([=]() {
            for (std::size_t i = t; i < n; i += n_threads) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace fluxtrace
