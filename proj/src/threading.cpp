#include "doaopt/threading.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>
#include <vector>

#include "doaopt/errors.hpp"

namespace doaopt {

namespace {
std::atomic<int> g_max_threads{1};
}

void set_max_threads(int n) {
    if (n < 1) throw InvalidArgument("thread count must be >= 1");
    g_max_threads.store(n);
}

int max_threads() { return g_max_threads.load(); }

void parallel_for(long n, const std::function<void(long)>& fn,
                  bool allow_threads) {
    const int workers = allow_threads
        ? static_cast<int>(std::min<long>(max_threads(), std::max<long>(n, 1)))
        : 1;
    if (workers <= 1 || n < 2) {
        for (long i = 0; i < n; ++i) fn(i);
        return;
    }

    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr first_error;
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    const long chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const long begin = w * chunk;
        const long end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end]() {
            try {
                for (long i = begin; i < end; ++i) {
                    if (failed.load(std::memory_order_relaxed)) return;
                    fn(i);
                }
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace doaopt
