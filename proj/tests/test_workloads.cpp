#include <algorithm>
#include <atomic>
#include <map>
#include <unordered_map>

#include "doctest.h"
#include "numabench/datagen.hpp"
#include "numabench/error.hpp"
#include "numabench/placement.hpp"
#include "numabench/workloads.hpp"

using namespace numabench;

namespace {

// Independent of the library: sort a copy and pick the lower median.
std::vector<std::pair<std::uint64_t, std::uint64_t>> expected_groups(const Dataset& d, AggKind kind) {
    std::map<std::uint64_t, std::vector<std::uint64_t>> by_key;
    for (const auto& r : d) by_key[r.key].push_back(r.value);
    std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
    for (auto& [k, vs] : by_key) {
        if (kind == AggKind::Distributive) {
            out.emplace_back(k, vs.size());
        } else {
            std::sort(vs.begin(), vs.end());
            out.emplace_back(k, vs[(vs.size() - 1) / 2]);
        }
    }
    return out;
}

std::uint64_t expected_matches(const Dataset& build, const Dataset& probe) {
    std::unordered_map<std::uint64_t, std::uint64_t> mult;
    for (const auto& r : build) ++mult[r.key];
    std::uint64_t n = 0;
    for (const auto& r : probe) {
        auto it = mult.find(r.key);
        if (it != mult.end()) n += it->second;
    }
    return n;
}

struct CountingHooks final : WorkerHooks {
    explicit CountingHooks(std::size_t t) : starts(t), stops(t) {}
    void start(std::size_t t) override { ++starts.at(t); }
    void stop(std::size_t t) override { ++stops.at(t); }
    std::vector<std::atomic<int>> starts, stops;
};

}  // namespace

TEST_CASE("aggregation matches the oracles for every thread count and placement") {
    const Topology host = discover();
    for (auto dist : {Distribution::MovingCluster, Distribution::Sequential, Distribution::Zipf}) {
        const Dataset data = generate_agg({dist, 60'000, 700, 0.9, 32, 5});
        for (auto kind : {AggKind::Holistic, AggKind::Distributive}) {
            const auto want = expected_groups(data, kind);
            CHECK(reference::oracle_aggregate(data, kind).groups == want);
            for (std::size_t threads : {1u, 2u, 3u, 8u}) {
                for (auto strategy : {Strategy::None, Strategy::Sparse, Strategy::Dense}) {
                    CAPTURE(to_string(dist));
                    CAPTURE(threads);
                    CAPTURE(to_string(strategy));
                    KernelOptions opt;
                    opt.morsel = 1024;
                    const auto plan = plan_threads(host, strategy, threads);
                    const AggResult r = run_aggregation(data, kind, threads, plan, opt);
                    CHECK(r.groups == want);
                    CHECK(r.elapsed >= 0.0);
                }
            }
        }
    }
}

TEST_CASE("aggregation lookups and edge inputs") {
    const Dataset data{{5, 10}, {5, 30}, {5, 20}, {5, 40}, {1, 7}};
    const AggResult med = run_aggregation(data, AggKind::Holistic, 2, {});
    CHECK(med.find(5) == std::optional<std::uint64_t>(20));  // lower median of 10,20,30,40
    CHECK(med.find(1) == std::optional<std::uint64_t>(7));
    CHECK(!med.find(2));
    const AggResult cnt = run_aggregation(data, AggKind::Distributive, 3, {});
    CHECK(cnt.find(5) == std::optional<std::uint64_t>(4));

    CHECK(run_aggregation({}, AggKind::Holistic, 4, {}).groups.empty());
    CHECK_THROWS_AS(run_aggregation(data, AggKind::Holistic, 0, {}), ConfigError);
}

TEST_CASE("requested-byte tracking is opt-in") {
    const Dataset data = generate_agg({Distribution::Sequential, 10'000, 100, 0.5, 1, 1});
    KernelOptions opt;
    CHECK(run_aggregation(data, AggKind::Holistic, 2, {}, opt).peak_requested == 0);
    opt.track_requested = true;
    const auto tracked = run_aggregation(data, AggKind::Holistic, 2, {}, opt);
    // At least the values themselves are buffered.
    CHECK(tracked.peak_requested >= data.size() * sizeof(std::uint64_t));
}

TEST_CASE("joins match the nested-loop oracle") {
    const Topology host = discover();
    const JoinTables t = generate_join({3'000, 20'000, 77});
    const std::uint64_t want = expected_matches(t.build, t.probe);
    CHECK(want == t.probe.size());
    CHECK(reference::oracle_join(t.build, t.probe) == want);
    const RadixIndex index = build_index(t.build);
    CHECK(index.size() == t.build.size());
    for (std::size_t threads : {1u, 2u, 5u}) {
        for (auto strategy : {Strategy::None, Strategy::Sparse, Strategy::Dense}) {
            CAPTURE(threads);
            const auto plan = plan_threads(host, strategy, threads);
            KernelOptions opt;
            opt.morsel = 512;
            const JoinResult h = run_hash_join(t.build, t.probe, threads, plan, opt);
            CHECK(h.match_count == want);
            CHECK(h.elapsed == doctest::Approx(h.build_elapsed + h.probe_elapsed));
            CHECK(run_index_join(index, t.probe, threads, plan, opt).match_count == want);
        }
    }
}

TEST_CASE("hash join counts duplicates and misses") {
    const Dataset build{{1, 0}, {1, 1}, {2, 0}, {~0ull, 3}, {0, 4}};
    const Dataset probe{{1, 0}, {2, 0}, {3, 0}, {~0ull, 0}, {0, 0}, {1, 9}};
    const std::uint64_t want = expected_matches(build, probe);
    CHECK(want == 7);
    CHECK(run_hash_join(build, probe, 3, {}).match_count == want);
    CHECK(reference::oracle_join(build, probe) == want);
    CHECK(run_hash_join({}, probe, 2, {}).match_count == 0);
    CHECK(run_hash_join(build, {}, 2, {}).match_count == 0);
}

TEST_CASE("index join needs unique build keys") {
    const Dataset build{{1, 0}, {1, 1}};
    CHECK_THROWS_AS(build_index(build), ConfigError);
}

TEST_CASE("worker hooks run once per worker") {
    const Dataset data = generate_agg({Distribution::Sequential, 5'000, 50, 0.5, 1, 1});
    const JoinTables t = generate_join({500, 4'000, 1});
    const RadixIndex index = build_index(t.build);
    for (int kernel = 0; kernel < 3; ++kernel) {
        CountingHooks hooks(4);
        KernelOptions opt;
        opt.hooks = &hooks;
        if (kernel == 0) run_aggregation(data, AggKind::Distributive, 4, {}, opt);
        if (kernel == 1) run_hash_join(t.build, t.probe, 4, {}, opt);
        if (kernel == 2) run_index_join(index, t.probe, 4, {}, opt);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(hooks.starts[i].load() == 1);
            CHECK(hooks.stops[i].load() == 1);
        }
    }
}

TEST_CASE("a plan for the wrong thread count is rejected") {
    const Topology host = discover();
    const Dataset data{{1, 1}};
    CHECK_THROWS_AS(run_aggregation(data, AggKind::Distributive, 2, plan_threads(host, Strategy::Sparse, 3)),
                    ConfigError);
}

TEST_CASE("workload names round-trip") {
    for (auto w : {Workload::W1, Workload::W2, Workload::W3, Workload::W4, Workload::Microbench})
        CHECK(parse_workload(to_string(w)) == w);
    CHECK_THROWS_AS(parse_workload("W5"), ConfigError);
}
