#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace pfd {

inline unsigned default_thread_count() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Runs fn(i) for i in [0, count) on up to `threads` workers with static
// chunking. Results must be written to per-index slots; reductions are the
// caller's job (done in index order afterwards, so output is independent of
// the thread count). The first worker exception is rethrown.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn,
                         unsigned threads = 0) {
    if (threads == 0) threads = default_thread_count();
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    if (threads > count) threads = static_cast<unsigned>(count);

    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    workers.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
        const std::size_t begin = count * w / threads;
        const std::size_t end = count * (w + 1) / threads;
        workers.emplace_back([&, begin, end]() {
            try {
                for (std::size_t i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : workers) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace pfd
