#include "kgr/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace kgr {

namespace {
int g_workers = 0;

int detect_workers() {
    if (const char* env = std::getenv("KGR_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}
}  // namespace

void set_worker_count(int n) { g_workers = n > 0 ? n : 0; }

int worker_count() { return g_workers > 0 ? g_workers : detect_workers(); }

void parallel_indexed_chunks(std::int64_t n,
                             const std::function<void(int, std::int64_t, std::int64_t)>& body) {
    if (n <= 0) return;
    const std::int64_t step = (n + kParallelChunks - 1) / kParallelChunks;
    const int chunks = static_cast<int>((n + step - 1) / step);
    const int workers = std::min(worker_count(), chunks);
    if (workers <= 1) {
        for (int c = 0; c < chunks; ++c) {
            std::int64_t b = c * step;
            body(c, b, std::min<std::int64_t>(b + step, n));
        }
        return;
    }
    std::atomic<int> next{0};
    auto run = [&] {
        for (;;) {
            int c = next.fetch_add(1);
            if (c >= chunks) return;
            std::int64_t b = c * step;
            body(c, b, std::min<std::int64_t>(b + step, n));
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (int i = 1; i < workers; ++i) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
}

void parallel_chunks(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& body) {
    parallel_indexed_chunks(n, [&](int, std::int64_t b, std::int64_t e) { body(b, e); });
}

}  // namespace kgr
