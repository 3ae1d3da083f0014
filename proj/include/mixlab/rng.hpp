#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <thread>
#include <vector>

namespace mixlab {

/// SplitMix64: tiny splittable generator with a 64-bit state.
/// Pure integer arithmetic, so streams are bit-identical across platforms.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0,1) with 53 random bits.
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Seed for an independent substream, e.g. one Monte-Carlo run.
    /// Depends only on (seed, stream), never on thread scheduling.
    static std::uint64_t substream(std::uint64_t seed, std::uint64_t stream) {
        SplitMix64 g(seed ^ (0xA0761D6478BD642Full + stream * 0xE7037ED1A0B428DBull));
        return g.next();
    }

private:
    std::uint64_t state_;
};

/// Runs body(run_index, worker_index) for run_index in [0, runs) on `threads`
/// workers. Callers make results deterministic by keying all randomness on the
/// run index (SplitMix64::substream) and by writing either into per-run slots
/// or into per-worker accumulators whose merge is order-independent.
template <class Body>
void parallel_runs_indexed(std::size_t runs, unsigned threads, Body&& body) {
    if (threads <= 1 || runs < 2) {
        for (std::size_t i = 0; i < runs; ++i) body(i, 0u);
        return;
    }
    std::atomic<std::size_t> cursor{0};
    auto worker = [&](unsigned wid) {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= runs) return;
            body(i, wid);
        }
    };
    std::vector<std::thread> pool;
    const unsigned n = std::min<unsigned>(threads, static_cast<unsigned>(runs));
    pool.reserve(n);
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
}

template <class Body>
void parallel_runs(std::size_t runs, unsigned threads, Body&& body) {
    parallel_runs_indexed(runs, threads, [&](std::size_t i, unsigned) { body(i); });
}

} // namespace mixlab
