#include <algorithm>
#include <optional>

#include "kernel_common.hpp"
#include "numabench/shared_hash_table.hpp"
#include "numabench/workloads.hpp"

namespace numabench {

std::string to_string(Workload w) {
    switch (w) {
    case Workload::W1: return "W1";
    case Workload::W2: return "W2";
    case Workload::W3: return "W3";
    case Workload::W4: return "W4";
    case Workload::Microbench: return "microbench";
    }
    return "?";
}

Workload parse_workload(const std::string& text) {
    std::string t = text;
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    if (t == "w1" || t == "holistic") return Workload::W1;
    if (t == "w2" || t == "distributive") return Workload::W2;
    if (t == "w3" || t == "hashjoin" || t == "hash-join") return Workload::W3;
    if (t == "w4" || t == "indexjoin" || t == "index-join") return Workload::W4;
    if (t == "microbench") return Workload::Microbench;
    throw ConfigError("unknown workload '" + text + "'");
}

std::optional<std::uint64_t> AggResult::find(std::uint64_t key) const {
    auto it = std::lower_bound(groups.begin(), groups.end(), key,
                               [](const auto& g, std::uint64_t k) { return g.first < k; });
    if (it == groups.end() || it->first != key) return std::nullopt;
    return it->second;
}

namespace {

using Clock = std::chrono::steady_clock;
using Groups = std::vector<std::pair<std::uint64_t, std::uint64_t>>;

template <typename State, typename Init, typename Update, typename Finalize>
AggResult aggregate(std::span<const Record> data, std::size_t threads, const PlacementPlan& plan,
                    const KernelOptions& options, Init init, Update update, Finalize finalize) {
    detail::prepare_region(threads, plan);
    ByteLedger ledger;
    ByteLedger* tracked = options.track_requested ? &ledger : nullptr;
    SharedHashTable<State> table(threads, tracked);
    MorselQueue morsels(data.size(), threads, options.morsel);
    std::vector<Groups> partial(table.shard_count());
    detail::ParallelErrors errors;
    Clock::time_point t0;
    double elapsed = 0.0;

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
            try {
                while (auto r = morsels.next(tid)) {
                    for (std::size_t i = r->begin; i < r->end; ++i) {
                        const Record& rec = data[i];
                        table.upsert(
                            rec.key, [&] { return init(tracked); }, [&](State& s) { update(s, rec.value); });
                    }
                }
            } catch (...) {
                errors.capture();
            }
        }
#pragma omp barrier
        if (!errors.failed()) {
#pragma omp for schedule(dynamic, 1)
            for (std::size_t s = 0; s < table.shard_count(); ++s) {
                auto& out = partial[s];
                out.reserve(table.shard(s).size());
                for (auto& [key, state] : table.shard(s)) out.emplace_back(key, finalize(state));
            }
        }
        if (options.hooks) options.hooks->stop(tid);
#pragma omp single
        elapsed = detail::seconds_since(t0);
    }
    errors.rethrow();

    AggResult result;
    result.elapsed = elapsed;
    result.peak_requested = ledger.peak();
    std::size_t total = 0;
    for (const auto& p : partial) total += p.size();
    result.groups.reserve(total);
    for (auto& p : partial) result.groups.insert(result.groups.end(), p.begin(), p.end());
    std::sort(result.groups.begin(), result.groups.end());
    return result;
}

}  // namespace

AggResult run_aggregation(std::span<const Record> dataset, AggKind kind, std::size_t threads,
                          const PlacementPlan& plan, const KernelOptions& options) {
    if (kind == AggKind::Distributive) {
        return aggregate<std::uint64_t>(
            dataset, threads, plan, options, [](ByteLedger*) { return std::uint64_t{0}; },
            [](std::uint64_t& count, std::uint64_t) { ++count; }, [](std::uint64_t count) { return count; });
    }
    // Holistic: every value of a group is buffered until finalization.
    using Buffer = std::vector<std::uint64_t, TrackingAllocator<std::uint64_t>>;
    return aggregate<Buffer>(
        dataset, threads, plan, options, [](ByteLedger* ledger) { return Buffer(TrackingAllocator<std::uint64_t>(ledger)); },
        [](Buffer& values, std::uint64_t v) { values.push_back(v); },
        [](Buffer& values) {
            auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
            std::nth_element(values.begin(), mid, values.end());
            return *mid;
        });
}

}  // namespace numabench
