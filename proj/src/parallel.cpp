#include "nlplap/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace nlplap {
namespace {

std::atomic<std::size_t> g_threads{1};
thread_local bool t_in_parallel = false;

constexpr std::size_t kLeaf = 128;

double pairwise(const double* v, std::size_t n) {
    if (n <= kLeaf) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise(v, half) + pairwise(v + half, n - half);
}

}  // namespace

void set_thread_count(std::size_t threads) { g_threads.store(std::max<std::size_t>(1, threads)); }

std::size_t thread_count() { return g_threads.load(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t grain) {
    if (n == 0) return;
    const std::size_t workers = std::min(thread_count(), (n + grain - 1) / std::max<std::size_t>(grain, 1));
    if (workers <= 1 || t_in_parallel) {
        body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> failures(workers);
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, w, lo, hi] {
            t_in_parallel = true;
            try {
                body(lo, hi);
            } catch (...) {
                failures[w] = std::current_exception();
            }
            t_in_parallel = false;
        });
    }
    for (auto& t : pool) t.join();
    for (auto& f : failures)
        if (f) std::rethrow_exception(f);
}

double ordered_sum(std::span<const double> values) { return pairwise(values.data(), values.size()); }

}  // namespace nlplap
