#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <mutex>
#include <thread>
#include <vector>

namespace lrss {

/// Global worker-count cap shared by all parallel kernels. 0 means "use all cores".
inline std::atomic<int>& thread_cap() {
    static std::atomic<int> cap{0};
    return cap;
}

inline void set_thread_cap(int n) { thread_cap().store(n < 0 ? 0 : n); }

inline int effective_threads(std::int64_t n_items) {
    int cap = thread_cap().load();
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    int t = (cap > 0) ? std::min(cap, hw) : hw;
    if (n_items < t) t = static_cast<int>(n_items);
    return std::max(t, 1);
}

inline bool& inside_parallel_region() {
    thread_local bool inside = false;
    return inside;
}

/// Runs f(i) for i in [0, n). Each index is processed exactly once and must
/// write only to its own output slot, so results do not depend on the number
/// of workers. Reductions over the slots belong to the caller, in index order.
/// Nested calls from inside a worker run serially.
template <typename F>
void parallel_for(std::int64_t n, F&& f) {
    if (n <= 0) return;
    const int nt = inside_parallel_region() ? 1 : effective_threads(n);
    if (nt == 1) {
        for (std::int64_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(nt));
    std::exception_ptr first_error;
    std::mutex err_mutex;
    for (int t = 0; t < nt; ++t) {
        pool.emplace_back([&] {
            inside_parallel_region() = true;
            for (;;) {
                const std::int64_t i = next.fetch_add(1);
                if (i >= n) break;
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace lrss
