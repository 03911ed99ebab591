#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace dpl {

// Worker count resolution: explicit request > DPL_THREADS > hardware.
inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("DPL_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

// Runs fn(chunk_index, begin, end) over [0, total) split into fixed-size
// chunks.  Chunk boundaries depend only on `total` and `chunk_size`, never on
// the worker count, so per-chunk results (merged in chunk order by the
// caller) are reproducible at any thread count.
template <typename Fn>
void for_each_chunk(std::uint64_t total, std::uint64_t chunk_size, int threads, Fn&& fn) {
    if (total == 0) return;
    const std::uint64_t n_chunks = (total + chunk_size - 1) / chunk_size;
    const int workers = std::min<std::uint64_t>(resolve_threads(threads), n_chunks);
    if (workers <= 1) {
        for (std::uint64_t c = 0; c < n_chunks; ++c) {
            const std::uint64_t lo = c * chunk_size;
            fn(c, lo, std::min(lo + chunk_size, total));
        }
        return;
    }
    std::atomic<std::uint64_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::uint64_t c = next.fetch_add(1);
                if (c >= n_chunks) return;
                const std::uint64_t lo = c * chunk_size;
                fn(c, lo, std::min(lo + chunk_size, total));
            }
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace dpl
