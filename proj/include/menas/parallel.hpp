#pragma once

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace menas {

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Callers keep
/// determinism by writing results into index-addressed slots and deriving any
/// randomness from i, never from thread identity.
template <typename Fn>
void parallel_for(int count, int workers, Fn&& fn) {
    workers = std::max(1, std::min(workers, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (int t = 0; t < workers; ++t) {
        threads.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= count) return;
                fn(i);
            }
        });
    }
    for (auto& th : threads) th.join();
}

}  // namespace menas
