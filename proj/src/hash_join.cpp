#include <atomic>
#include <bit>
#include <memory>
#include <optional>

#include "kernel_common.hpp"
#include "numabench/shared_hash_table.hpp"
#include "numabench/workloads.hpp"

namespace numabench {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kEmpty = ~std::uint64_t{0};

/// Lock-free linear-probing table holding every build tuple (duplicates
/// included). Slots are claimed with a CAS on the key word. Tuples whose key
/// equals the empty marker are only counted.
class JoinHashTable {
public:
    explicit JoinHashTable(std::size_t tuples)
        : capacity_(std::bit_ceil(std::max<std::size_t>(2 * tuples, 16))),
          mask_(capacity_ - 1),
          slots_(std::make_unique_for_overwrite<Slot[]>(capacity_)) {}

    std::size_t capacity() const noexcept { return capacity_; }

    /// Called for disjoint ranges by all workers so pages are first-touched
    /// by the threads that will use them.
    void clear(std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            slots_[i].key = kEmpty;
            slots_[i].payload = 0;
        }
    }

    void insert(std::uint64_t key, std::uint64_t payload) {
        if (key == kEmpty) {
            sentinel_tuples_.fetch_add(1, std::memory_order_relaxed);
            return;
        }
        for (std::size_t h = mix64(key) & mask_;; h = (h + 1) & mask_) {
            std::atomic_ref<std::uint64_t> slot_key(slots_[h].key);
            std::uint64_t expected = kEmpty;
            if (slot_key.load(std::memory_order_relaxed) == kEmpty &&
                slot_key.compare_exchange_strong(expected, key, std::memory_order_relaxed)) {
                slots_[h].payload = payload;
                return;
            }
        }
    }

    /// Number of build tuples with this key. Only valid once all inserts finished.
    std::uint64_t matches(std::uint64_t key) const {
        if (key == kEmpty) return sentinel_tuples_.load(std::memory_order_relaxed);
        std::uint64_t n = 0;
        for (std::size_t h = mix64(key) & mask_;; h = (h + 1) & mask_) {
            const std::uint64_t k = slots_[h].key;
            if (k == kEmpty) return n;
            n += (k == key);
        }
    }

private:
    struct Slot {
        std::uint64_t key;
        std::uint64_t payload;
    };

    std::size_t capacity_;
    std::size_t mask_;
    std::unique_ptr<Slot[]> slots_;
    std::atomic<std::uint64_t> sentinel_tuples_{0};
};

}  // namespace

JoinResult run_hash_join(std::span<const Record> build, std::span<const Record> probe, std::size_t threads,
                         const PlacementPlan& plan, const KernelOptions& options) {
    detail::prepare_region(threads, plan);
    JoinHashTable table(build.size());
    MorselQueue build_morsels(build.size(), threads, options.morsel);
    MorselQueue probe_morsels(probe.size(), threads, options.morsel);
    std::atomic<std::uint64_t> matches{0};
    detail::ParallelErrors errors;
    Clock::time_point t0, t1;
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
            const std::size_t cap = table.capacity();
            table.clear(cap * tid / threads, cap * (tid + 1) / threads);
        }
#pragma omp barrier
        if (!errors.failed()) {
            while (auto r = build_morsels.next(tid))
                for (std::size_t i = r->begin; i < r->end; ++i) table.insert(build[i].key, build[i].value);
        }
#pragma omp barrier
#pragma omp single
        t1 = Clock::now();
        if (!errors.failed()) {
            std::uint64_t local = 0;
            while (auto r = probe_morsels.next(tid))
                for (std::size_t i = r->begin; i < r->end; ++i) local += table.matches(probe[i].key);
            matches.fetch_add(local, std::memory_order_relaxed);
        }
        if (options.hooks) options.hooks->stop(tid);
#pragma omp barrier
#pragma omp single
        {
            const auto t2 = Clock::now();
            result.build_elapsed = std::chrono::duration<double>(t1 - t0).count();
            result.probe_elapsed = std::chrono::duration<double>(t2 - t1).count();
            result.elapsed = std::chrono::duration<double>(t2 - t0).count();
        }
    }
    errors.rethrow();
    result.match_count = matches.load();
    return result;
}

}  // namespace numabench
