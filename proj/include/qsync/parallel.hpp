// parallel.hpp - index-ordered parallel map over independent work items

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <type_traits>
#include <vector>

namespace qsync {

inline std::size_t default_workers() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Results land at their input index, so output order never depends on scheduling.
// The first exception (by index) is rethrown after all workers join.
template <typename F>
auto parallel_map(std::size_t n, F&& fn, std::size_t workers = 0)
    -> std::vector<std::invoke_result_t<F&, std::size_t>> {
    using R = std::invoke_result_t<F&, std::size_t>;
    std::vector<R> out(n);
    std::vector<std::exception_ptr> errors(n);
    if (workers == 0) workers = default_workers();
    workers = std::min(workers, n);

    std::atomic<std::size_t> next{0};
    auto run = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                out[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        run();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

} // namespace qsync
