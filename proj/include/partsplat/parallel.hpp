#pragma once

// Static block-partitioned parallel loop. Work items write disjoint slots, so
// the result never depends on the thread count; callers that reduce must merge
// per-item buffers in index order themselves.

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace partsplat {

inline int default_thread_count() {
    if (const char* env = std::getenv("PARTSPLAT_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// `grain` is the minimum item count worth spawning threads for; loops with a
// few heavy items pass 2.
template <typename Fn>
void parallel_for(int n, Fn&& fn, int grain = 64) {
    const int threads = std::min(default_thread_count(), std::max(n, 1));
    if (n <= 0) return;
    if (threads <= 1 || n < grain) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    const int chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const int lo = t * chunk;
        const int hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (int i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace partsplat
