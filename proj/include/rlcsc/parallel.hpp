#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace rlcsc {

// Worker count from RLCSC_THREADS, default 1. Read once.
inline int thread_count() {
    static const int n = [] {
        const char* env = std::getenv("RLCSC_THREADS");
        if (!env) return 1;
        const long v = std::strtol(env, nullptr, 10);
        return v < 1 ? 1 : static_cast<int>(v);
    }();
    return n;
}

// Static chunking over [0, count). Each chunk is a contiguous index range, so
// callers that keep per-item state disjoint stay bitwise deterministic for a
// fixed thread count; with one thread this degenerates to a plain loop.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& body) {
    const int workers = thread_count();
    if (workers <= 1 || count <= 1) {
        body(0, count);
        return;
    }
    const std::size_t nthreads = std::min<std::size_t>(workers, count);
    const std::size_t chunk = (count + nthreads - 1) / nthreads;
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(count, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&body, begin, end] { body(begin, end); });
    }
    for (auto& th : pool) th.join();
}

} // namespace rlcsc
