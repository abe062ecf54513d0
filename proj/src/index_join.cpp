#include <atomic>
#include <optional>

#include "kernel_common.hpp"
#include "numabench/workloads.hpp"

namespace numabench {

RadixIndex build_index(std::span<const Record> build) {
    RadixIndex index;
    for (const auto& r : build) index.insert(r.key, r.value);
    return index;
}

JoinResult run_index_join(const RadixIndex& index, std::span<const Record> probe, std::size_t threads,
                          const PlacementPlan& plan, const KernelOptions& options) {
    using Clock = std::chrono::steady_clock;
    detail::prepare_region(threads, plan);
    MorselQueue morsels(probe.size(), threads, options.morsel);
    std::atomic<std::uint64_t> matches{0};
    detail::ParallelErrors errors;
    Clock::time_point t0;
    JoinResult result;

#pragma omp parallel num_threads(threads)
    {
        const auto tid = static_cast<std::size_t>(omp_get_thread_num());
        std::optional<AffinityGuard> pin;
        try {
            pin.emplace(plan, tid);
        } catch (...) {
            errors.capture();
        }
        if (options.hooks) options.hooks->start(tid);
#pragma omp single
        {
            detail::check_team(threads, errors);
            t0 = Clock::now();
        }
        if (!errors.failed()) {
            std::uint64_t local = 0;
            while (auto r = morsels.next(tid))
                for (std::size_t i = r->begin; i < r->end; ++i) local += index.contains(probe[i].key);
            matches.fetch_add(local, std::memory_order_relaxed);
        }
        if (options.hooks) options.hooks->stop(tid);
#pragma omp barrier
#pragma omp single
        result.elapsed = result.probe_elapsed = detail::seconds_since(t0);
    }
    errors.rethrow();
    result.match_count = matches.load();
    return result;
}

}  // namespace numabench
