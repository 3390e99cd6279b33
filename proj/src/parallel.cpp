#include "sigstop/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace sigstop {

namespace {
int g_threads = std::max(1u, std::thread::hardware_concurrency());
constexpr std::size_t kDefaultChunk = 1024;
}  // namespace

void set_thread_count(int n) { g_threads = std::max(1, n); }
int thread_count() { return g_threads; }

void parallel_chunks(std::size_t n, std::size_t chunk_size,
                     const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    chunk_size = std::max<std::size_t>(1, chunk_size);
    const std::size_t n_chunks = (n + chunk_size - 1) / chunk_size;
    const int workers = static_cast<int>(std::min<std::size_t>(g_threads, n_chunks));

    if (workers <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c)
            fn(c * chunk_size, std::min(n, (c + 1) * chunk_size));
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= n_chunks || failed.load()) return;
            try {
                fn(c * chunk_size, std::min(n, (c + 1) * chunk_size));
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers) - 1);
    for (int i = 1; i < workers; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failed.load() && error) std::rethrow_exception(error);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    parallel_chunks(n, kDefaultChunk, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) fn(i);
    });
}

}  // namespace sigstop
