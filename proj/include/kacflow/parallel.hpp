#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <optional>
#include <thread>
#include <vector>

#include "kacflow/errors.hpp"
#include "kacflow/numeric.hpp"

namespace kacflow {

struct MonteCarloOptions {
    std::size_t samples = 1'000'000;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    long long max_steps = 10'000'000;
};

template <std::size_t K>
struct SampleSummary {
    RunningMoments<K> moments;
    std::size_t attempted = 0;
    std::size_t discarded = 0;
};

/// Share of `total` handled by worker `w` out of `workers`.
inline std::size_t worker_share(std::size_t total, unsigned workers, unsigned w) {
    return total / workers + (w < total % workers ? 1 : 0);
}

/// Splits opts.samples across opts.workers threads. Worker w draws from
/// RandomStream::derive(seed, w) using the callable returned by make_draw(w);
/// a draw returns the K observed values. Draws that throw
/// NonRecurrentWithinBudget are counted as discarded. Partial results are
/// merged in worker order, so the summary depends only on (seed, workers).
template <std::size_t K, class MakeDraw>
SampleSummary<K> sample_parallel(const MonteCarloOptions& opts, MakeDraw&& make_draw) {
    const unsigned workers = opts.workers == 0 ? 1 : opts.workers;
    std::vector<SampleSummary<K>> partial(workers);
    std::vector<std::exception_ptr> errors(workers);

    auto job = [&](unsigned w) {
        try {
            RandomStream rng = RandomStream::derive(opts.seed, w);
            auto draw = make_draw(w);
            auto& out = partial[w];
            const std::size_t n = worker_share(opts.samples, workers, w);
            for (std::size_t i = 0; i < n; ++i) {
                ++out.attempted;
                try {
                    out.moments.push(draw(rng));
                } catch (const NonRecurrentWithinBudget&) {
                    ++out.discarded;
                }
            }
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };

    if (workers == 1) {
        job(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(job, w);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    SampleSummary<K> total;
    for (const auto& p : partial) {
        total.moments.merge(p.moments);
        total.attempted += p.attempted;
        total.discarded += p.discarded;
    }
    return total;
}

} // namespace kacflow
