#ifndef FRACNET_PARALLEL_HPP
#define FRACNET_PARALLEL_HPP

#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace fracnet {

/// Worker count from FRACNET_THREADS, else 1.
inline int default_threads() {
    if (const char* env = std::getenv("FRACNET_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0)
                return v;
        } catch (...) {
        }
    }
    return 1;
}

/// Runs fn(i) for i in [0, count) on at most `threads` workers. Each task owns its slot in any
/// output the caller preallocates. The exception of the lowest failing index is rethrown.
template <typename F>
void parallel_for(std::size_t count, int threads, F&& fn) {
    std::vector<std::exception_ptr> errors(count);
    const std::size_t workers = std::min<std::size_t>(count, std::size_t(std::max(threads, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
                break;
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

} // namespace fracnet

#endif // FRACNET_PARALLEL_HPP
