#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace hjbt {

/// Runs body(begin, end, chunk) over [0, n) split into contiguous chunks, one per worker.
/// Chunk boundaries depend only on n and workers; callers reduce per-chunk results in chunk order.
template <class Body>
void parallel_chunks(long n, int workers, Body&& body) {
    const int w = static_cast<int>(std::max<long>(1, std::min<long>(workers < 1 ? 1 : workers, n)));
    if (w == 1) {
        body(0L, n, 0);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(w);
    for (int c = 0; c < w; ++c) {
        const long b = n * c / w, e = n * (c + 1) / w;
        pool.emplace_back([&, b, e, c] {
            try {
                body(b, e, c);
            } catch (...) {
                errs[c] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

/// Effective worker count used by parallel_chunks.
inline int chunk_count(long n, int workers) {
    return static_cast<int>(std::max<long>(1, std::min<long>(workers < 1 ? 1 : workers, n)));
}

}  // namespace hjbt
