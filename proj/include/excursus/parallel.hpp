#pragma once

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace excursus {

// Thread count resolution: explicit argument > EXCURSUS_THREADS > hardware.
inline int resolve_threads(int requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("EXCURSUS_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs fn(i) for i in [0, count) over `threads` workers in fixed round-robin
// shards. Work must communicate through per-index slots so the result is
// independent of scheduling; reductions happen after the join, in index order.
template <typename Fn>
void parallel_for(long count, int threads, Fn&& fn) {
    threads = resolve_threads(threads);
    if (threads <= 1 || count < 2 * threads) {
        for (long i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([w, threads, count, &fn] {
            for (long i = w; i < count; i += threads) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

// Streaming mean/variance accumulator; merge order is fixed by the caller so
// parallel reductions stay deterministic.
struct Welford {
    long n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        double d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }

    void merge(const Welford& o) {
        if (o.n == 0) return;
        if (n == 0) { *this = o; return; }
        double d = o.mean - mean;
        long total = n + o.n;
        mean += d * o.n / total;
        m2 += o.m2 + d * d * (static_cast<double>(n) * o.n) / total;
        n = total;
    }

    double variance() const { return n > 1 ? m2 / (n - 1) : 0.0; }
    double std_error() const {
        return n > 1 ? std::sqrt(variance() / n) : 0.0;
    }
};

} // namespace excursus
