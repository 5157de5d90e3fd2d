#pragma once

// Deterministic work partitioning: items are split into fixed chunks that do
// not depend on the thread count; workers pull chunk indices from a shared
// counter and write into per-chunk slots, so any order-sensitive merge can be
// done afterwards in chunk order.  Results are identical for any `threads`.

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace curlflow {

inline int effective_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// fn(chunk_index, begin, end) with [begin,end) the item range of the chunk.
inline void parallel_chunks(std::size_t n_items, std::size_t n_chunks, int threads,
                            const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    if (n_items == 0) return;
    if (n_chunks == 0 || n_chunks > n_items) n_chunks = n_items;
    threads = effective_threads(threads);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= n_chunks) return;
            const std::size_t begin = c * n_items / n_chunks;
            const std::size_t end = (c + 1) * n_items / n_chunks;
            fn(c, begin, end);
        }
    };
    if (threads <= 1) {
        worker();
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

}  // namespace curlflow
