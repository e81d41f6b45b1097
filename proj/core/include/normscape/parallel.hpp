#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace normscape {

// Thread cap: NORMSCAPE_THREADS if set, else hardware concurrency.
inline int max_threads() {
    static const int cached = [] {
        if (const char* env = std::getenv("NORMSCAPE_THREADS")) {
            int n = std::atoi(env);
            if (n >= 1) return n;
        }
        unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : static_cast<int>(hw);
    }();
    return cached;
}

// Runs fn(begin, end) over fixed-size chunks of [0, count). The chunk grid
// depends only on (count, grain), never on the thread count, and chunks write
// to disjoint state, so results are identical for any NORMSCAPE_THREADS.
// Reductions across chunks must be done by the caller in chunk order.
inline void parallel_chunks(int64_t count, int64_t grain,
                            const std::function<void(int64_t, int64_t)>& fn) {
    if (count <= 0) return;
    if (grain < 1) grain = 1;
    const int64_t nchunks = (count + grain - 1) / grain;
    const int threads = std::min<int64_t>(max_threads(), nchunks);
    if (threads <= 1) {
        for (int64_t c = 0; c < nchunks; ++c) {
            fn(c * grain, std::min(count, (c + 1) * grain));
        }
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([=, &fn] {
            for (int64_t c = t; c < nchunks; c += threads) {
                fn(c * grain, std::min(count, (c + 1) * grain));
            }
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace normscape
