// Acceptance gate: one PASS/FAIL/SKIP line per criterion, exit status 1 on any FAIL.

#include <sys/mman.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "numabench/advisor.hpp"
#include "numabench/allocbench.hpp"
#include "numabench/datagen.hpp"
#include "numabench/placement.hpp"
#include "numabench/runner.hpp"
#include "numabench/workloads.hpp"

using namespace numabench;
namespace fs = std::filesystem;

namespace {

enum class Verdict { Pass, Fail, Skip };

int failures = 0;

void report(int ac, Verdict v, const std::string& what) {
    const char* tag = v == Verdict::Pass ? "PASS" : v == Verdict::Fail ? "FAIL" : "SKIP";
    if (v == Verdict::Fail) ++failures;
    std::cout << "AC" << ac << ' ' << tag << "  " << what << std::endl;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Topology fixture(const char* name) { return Topology::load_fixture(fs::path(FIXTURE_DIR) / name); }

// ---- AC1 -------------------------------------------------------------------

// Runs every aggregation and join configuration under one memory policy.
// Meant to run in a fresh process so the policy governs every allocation.
int ac1_policy_child(const MemPolicy& policy, std::uint64_t join_oracle) {
    const Topology host = discover();
    const MemPolicyOutcome applied = apply_mempolicy(policy, host);
    if (applied.fell_back) std::cerr << "  note: " << applied.warning << '\n';
    int bad = 0;
    for (auto dist : {Distribution::MovingCluster, Distribution::Sequential, Distribution::Zipf}) {
        const Dataset data = generate_agg({dist, 100'000, 1'000, 0.5, 64, 42});
        const AggResult med = reference::oracle_aggregate(data, AggKind::Holistic);
        const AggResult cnt = reference::oracle_aggregate(data, AggKind::Distributive);
        for (std::size_t threads : {1u, 2u, 4u, 8u})
            for (auto strategy : {Strategy::None, Strategy::Sparse, Strategy::Dense}) {
                const auto plan = plan_threads(host, strategy, threads);
                if (run_aggregation(data, AggKind::Holistic, threads, plan).groups != med.groups) ++bad;
                if (run_aggregation(data, AggKind::Distributive, threads, plan).groups != cnt.groups) ++bad;
            }
    }
    const JoinTables t = generate_join(JoinDatasetSpec::with_ratio(10'000));
    const RadixIndex index = build_index(t.build);
    for (std::size_t threads : {1u, 2u, 4u, 8u})
        for (auto strategy : {Strategy::None, Strategy::Sparse, Strategy::Dense}) {
            const auto plan = plan_threads(host, strategy, threads);
            if (run_hash_join(t.build, t.probe, threads, plan).match_count != join_oracle) ++bad;
            if (run_index_join(index, t.probe, threads, plan).match_count != join_oracle) ++bad;
        }
    if (bad) std::cerr << "  " << bad << " mismatches under " << to_string(policy) << '\n';
    return bad == 0 ? 0 : 1;
}

void ac1() {
    const auto t0 = std::chrono::steady_clock::now();
    const JoinTables t = generate_join(JoinDatasetSpec::with_ratio(10'000));
    const std::uint64_t oracle = reference::oracle_join(t.build, t.probe);
    int bad_policies = 0;
    std::string failed;
    for (const MemPolicy& p : {MemPolicy{}, MemPolicy{MemPolicyKind::Interleave, 0},
                               MemPolicy{MemPolicyKind::LocalAlloc, 0}, MemPolicy{MemPolicyKind::Preferred, 0}}) {
        std::cout.flush();
        const pid_t pid = fork();
        if (pid == 0) _exit(ac1_policy_child(p, oracle));
        int status = 0;
        waitpid(pid, &status, 0);
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
            ++bad_policies;
            failed += " " + to_string(p);
        }
    }
    const double secs = seconds_since(t0);
    std::ostringstream what;
    what << "workload correctness: 3 distributions x T{1,2,4,8} x 3 placements x 4 policies, W1/W2 maps and W3/W4 "
            "match counts equal the oracles ("
         << std::fixed << std::setprecision(1) << secs << " s)";
    if (bad_policies) what << "; mismatches under" << failed;
    if (secs >= 120.0) what << "; over the 2 minute budget";
    report(1, bad_policies == 0 && secs < 120.0 ? Verdict::Pass : Verdict::Fail, what.str());
}

// ---- AC2 -------------------------------------------------------------------

void ac2() {
    std::vector<std::string> problems;
    const Dataset z = generate_agg({Distribution::Zipf, 1'000'000, 2, 0.5, 1, 42});
    double c0 = 0, c1 = 0;
    for (const auto& r : z) (r.key == 0 ? c0 : c1) += 1;
    const double ratio = c0 / c1;
    const double rel = std::abs(ratio - std::sqrt(2.0)) / std::sqrt(2.0);
    if (rel >= 0.02) problems.push_back("zipf ratio " + std::to_string(ratio));

    std::vector<std::uint64_t> keys;
    for (const auto& r : generate_agg({Distribution::Sequential, 8, 4, 0.5, 1, 42})) keys.push_back(r.key);
    if (keys != std::vector<std::uint64_t>{0, 0, 1, 1, 2, 2, 3, 3}) problems.push_back("sequential keys");

    for (auto d : {Distribution::MovingCluster, Distribution::Sequential, Distribution::Zipf}) {
        const AggDatasetSpec s{d, 200'000, 2'000, 0.9, 64, 7};
        const Dataset a = generate_agg(s), b = generate_agg(s);
        if (a.size() != b.size() || std::memcmp(a.data(), b.data(), a.size() * sizeof(Record)) != 0)
            problems.push_back("nondeterministic " + to_string(d));
    }
    const auto ja = generate_join(JoinDatasetSpec::with_ratio(5'000, 3));
    const auto jb = generate_join(JoinDatasetSpec::with_ratio(5'000, 3));
    if (ja.build != jb.build || ja.probe != jb.probe) problems.push_back("nondeterministic join");

    std::ostringstream what;
    what << "generator statistics: zipf rank1/rank2 = " << std::setprecision(5) << ratio << " (sqrt2 within "
         << std::setprecision(2) << rel * 100 << "%), sequential keys exact, generations byte-identical";
    for (const auto& p : problems) what << "; " << p;
    report(2, problems.empty() ? Verdict::Pass : Verdict::Fail, what.str());
}

// ---- AC3 -------------------------------------------------------------------

std::uint64_t replay_peak(const MicrobenchConfig& c) {
    const SizeClassSampler sizes(c.size_classes);
    std::uint64_t sum = 0;
    for (std::size_t t = 0; t < c.threads; ++t) {
        Rng rng(c.seed, t);
        std::vector<std::size_t> live;
        std::uint64_t bytes = 0, peak = 0;
        for (std::uint64_t op = 0; op < c.ops_per_thread; ++op) {
            const bool alloc = live.empty() ? true : live.size() >= c.live_cap ? false : rng.coin();
            if (alloc) {
                live.push_back(sizes.sample(rng));
                bytes += live.back();
                peak = std::max(peak, bytes);
            } else {
                const auto idx = rng.below(live.size());
                bytes -= live[idx];
                live[idx] = live.back();
                live.pop_back();
            }
        }
        sum += peak;
    }
    return sum;
}

void ac3() {
    MicrobenchConfig live;
    live.threads = 4;
    live.ops_per_thread = 200'000;
    const MicrobenchResult r = run_microbench(live);
    const std::uint64_t replay = replay_peak(live);

    // Residency is measured in a fresh worker process, as a real run would.
    ExperimentConfig touched;
    touched.workload = Workload::Microbench;
    touched.repetitions = 2;
    touched.microbench.ops_per_thread = 200'000;
    touched.microbench.live_cap = 1 << 16;
    touched.microbench.size_classes = {4096, 16384, 65536};
    RunnerOptions options;
    options.worker_exe = NUMABENCH_EXE;
    const RunResult run = execute_run(touched, options);
    const auto& measured = run.reps.back();
    const double ratio = measured.detail.at("overhead_ratio").get<double>();
    const auto requested = measured.detail.at("peak_requested").get<std::uint64_t>();
    const double formula = compute_overhead(150, 100);

    const bool ok = r.peak_requested == replay && formula == 1.5 && ratio >= 0.9;
    std::ostringstream what;
    what << "microbenchmark accounting: live peak_requested " << r.peak_requested << " vs replay " << replay
         << ", 150/100 -> " << formula << ", write-touched overhead_ratio " << std::setprecision(3)
         << ratio << " over " << requested << " requested bytes in a fresh worker (whole-process peak rss "
         << measured.peak_rss << ")";
    report(3, ok ? Verdict::Pass : Verdict::Fail, what.str());
}

// ---- AC4 -------------------------------------------------------------------

void ac4() {
    const Topology a = fixture("machine_a.json");
    auto nodes = [&](const PlacementPlan& p) {
        std::set<int> n;
        for (int cpu : p.assignment) n.insert(a.node_of_cpu(cpu));
        return n.size();
    };
    const auto sparse4 = plan_threads(a, Strategy::Sparse, 4);
    const auto dense4 = plan_threads(a, Strategy::Dense, 4);
    auto s16 = plan_threads(a, Strategy::Sparse, 16).assignment;
    auto d16 = plan_threads(a, Strategy::Dense, 16).assignment;
    std::sort(s16.begin(), s16.end());
    std::sort(d16.begin(), d16.end());
    bool stable = true;
    for (int i = 0; i < 100; ++i)
        for (auto s : {Strategy::Sparse, Strategy::Dense})
            for (std::size_t t : {4u, 16u}) stable = stable && plan_threads(a, s, t) == plan_threads(a, s, t);
    const bool ok = nodes(sparse4) == 4 && nodes(dense4) == 2 && s16 == d16 && stable;
    std::ostringstream what;
    what << "placement planning on 8x2 fixture: Sparse T=4 -> " << nodes(sparse4) << " nodes, Dense T=4 -> "
         << nodes(dense4) << " nodes, T=16 sets " << (s16 == d16 ? "identical" : "differ") << ", 100 recomputations "
         << (stable ? "stable" : "unstable");
    report(4, ok ? Verdict::Pass : Verdict::Fail, what.str());
}

// ---- AC5 -------------------------------------------------------------------

void ac5() {
    const Topology host = discover();
    const auto plan = plan_threads(host, Strategy::Sparse, host.cpu_count());
    std::size_t checked = 0, good = 0;
    std::string error;
    std::thread worker([&] {
        try {
            for (std::size_t i = 0; i < plan.assignment.size(); ++i) {
                const auto cpu = apply_affinity(plan, i);
                ++checked;
                if (cpu && current_affinity() == std::vector<int>{*cpu}) ++good;
            }
        } catch (const std::exception& e) {
            error = e.what();
        }
    });
    worker.join();
    std::ostringstream what;
    what << "affinity postcondition: " << good << "/" << checked << " planned cpus read back as singleton masks";
    if (!error.empty()) what << "; " << error;
    report(5, checked > 0 && good == checked && error.empty() ? Verdict::Pass : Verdict::Fail, what.str());
}

// ---- AC6 -------------------------------------------------------------------

void ac6() {
    const std::vector<double> reps{10.0, 1.0, 1.1, 0.9};
    const Summary s = summarize_reps(reps);
    std::ostringstream what;
    what << "cold-run rule: [10.0, 1.0, 1.1, 0.9] -> mean " << std::setprecision(17) << s.mean << " over "
         << s.count << " measured reps";
    report(6, s.mean == 1.0 && s.count == 3 ? Verdict::Pass : Verdict::Fail, what.str());
}

// ---- AC7 -------------------------------------------------------------------

void ac7() {
    const Topology a = fixture("machine_a.json");
    const std::vector<CalibrationSample> samples{{{"A", "/opt/libA.so"}, 3.0, 1.2, std::nullopt},
                                                 {{"B", "/opt/libB.so"}, 5.0, 1.1, std::nullopt},
                                                 {{"C", "/opt/libC.so"}, 2.0, 2.5, std::nullopt}};
    const Ranking ranking = rank_allocators(samples, 2.0);
    const auto findings = audit(a, {ThpMode::Always, Balancing::On});
    const auto recs = recommend(findings, ranking, {});

    std::vector<std::string> got;
    for (const auto& r : recs) got.push_back(r.id);
    const std::vector<std::string> want{"disable-thp", "disable-numa-balancing", "use-interleave", "pin-sparse",
                                        "use-allocator"};
    const bool order_ok = got == want;
    const bool winner_ok = order_ok && recs[4].allocator && recs[4].allocator->id == "A";
    const bool mitigation_ok = order_ok && recs[1].mitigation.has_value();
    const bool excluded_ok = std::any_of(ranking.findings.begin(), ranking.findings.end(),
                                         [](const Finding& f) { return f.id == "allocator-excluded:C"; }) &&
                             std::none_of(ranking.ranked.begin(), ranking.ranked.end(),
                                          [](const RankedAllocator& r) { return r.allocator.id == "C"; });

    const auto settled = audit(a, {ThpMode::Never, Balancing::Off});
    RecommendOptions on_a;
    on_a.current_allocator = "A";
    const auto again = recommend(settled, ranking, on_a);
    const auto warn_again = std::count_if(again.begin(), again.end(),
                                          [](const Recommendation& r) { return r.severity == Severity::Warn; });

    std::ostringstream what;
    what << "advisor: recommendations [";
    for (std::size_t i = 0; i < got.size(); ++i) what << (i ? ", " : "") << got[i];
    what << "], allocator=" << (winner_ok ? "A" : "?") << ", C excluded " << (excluded_ok ? "with finding" : "NOT")
         << ", idempotent state -> " << warn_again << " warn recommendations";
    report(7, order_ok && winner_ok && mitigation_ok && excluded_ok && warn_again == 0 ? Verdict::Pass : Verdict::Fail,
           what.str());
}

// ---- AC8 -------------------------------------------------------------------

struct Placement {
    std::map<int, std::size_t> pages;
    std::size_t total = 0;
};

Placement touch_under(const MemPolicy& policy, const Topology& host, std::optional<int> pin_cpu) {
    Placement out;
    std::thread worker([&] {
        if (pin_cpu) apply_affinity(PlacementPlan{Strategy::Sparse, {*pin_cpu}, false}, 0);
        apply_mempolicy(policy, host);
        constexpr std::size_t kBytes = 64u << 20;
        void* p = mmap(nullptr, kBytes, PROT_READ | PROT_WRITE, MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
        if (p == MAP_FAILED) return;
        std::memset(p, 1, kBytes);
        for (int n : page_nodes({static_cast<const std::byte*>(p), kBytes}))
            if (n >= 0) {
                ++out.pages[n];
                ++out.total;
            }
        munmap(p, kBytes);
        apply_mempolicy({}, host);
    });
    worker.join();
    return out;
}

std::size_t share_of(const Placement& p, int node) {
    const auto it = p.pages.find(node);
    return it == p.pages.end() ? 0 : it->second;
}

void ac8() {
    const Topology host = discover();
    std::vector<int> mem_nodes;
    for (const auto& n : host.nodes())
        if (n.mem_total > 0) mem_nodes.push_back(n.id);
    if (mem_nodes.size() < 2) {
        report(8, Verdict::Skip,
               "page placement: host exposes " + std::to_string(mem_nodes.size()) +
                   " memory node(s); needs >= 2 NUMA nodes");
        return;
    }
    const double n = static_cast<double>(mem_nodes.size());
    const Placement inter = touch_under({MemPolicyKind::Interleave, 0}, host, std::nullopt);
    double worst_dev = 0;
    for (int node : mem_nodes) {
        const double share = inter.total ? static_cast<double>(share_of(inter, node)) / static_cast<double>(inter.total) : 0;
        worst_dev = std::max(worst_dev, std::abs(share * n - 1.0));
    }
    const Placement pref = touch_under({MemPolicyKind::Preferred, 0}, host, std::nullopt);
    const double on0 = pref.total ? static_cast<double>(share_of(pref, 0)) / static_cast<double>(pref.total) : 0;

    const int cpu0 = host.nodes()[0].cpus.empty() ? -1 : host.nodes()[0].cpus.front();
    std::optional<double> proxy;
    if (cpu0 >= 0) {
        const Placement bound = touch_under({MemPolicyKind::Interleave, 0}, host, cpu0);
        std::map<int, std::uint64_t> kib;
        for (const auto& [node, pages] : bound.pages) kib[node] = pages * 4;
        proxy = page_locality(kib, {host.node_of_cpu(cpu0)});
    }
    const bool ok = inter.total > 0 && worst_dev <= 0.20 && on0 >= 0.95 && proxy && std::abs(*proxy - 1.0 / n) <= 0.05;
    std::ostringstream what;
    what << std::setprecision(3) << "page placement on " << mem_nodes.size() << " nodes: interleave max deviation "
         << worst_dev * 100 << "% of uniform, Preferred0 " << on0 * 100 << "% on node 0, bound-thread locality proxy "
         << (proxy ? *proxy * 100 : -1) << "% vs " << 100.0 / n << "%";
    report(8, ok ? Verdict::Pass : Verdict::Fail, what.str());
}

// ---- AC9 -------------------------------------------------------------------

double coefficient_of_variation(const RunResult& r) {
    std::vector<double> v;
    for (std::size_t i = 1; i < r.reps.size(); ++i) v.push_back(r.reps[i].elapsed);
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size() - 1);
    return std::sqrt(var) / mean;
}

void ac9() {
    const Topology host = discover();
    if (host.cpu_count() < 2) {
        report(9, Verdict::Skip,
               "affinity stability: only " + std::to_string(host.cpu_count()) +
                   " allowed cpu(s); pinning cannot differ from the scheduler's choice");
        return;
    }
    RunnerOptions options;
    options.worker_exe = NUMABENCH_EXE;
    ExperimentConfig c;
    c.workload = Workload::W1;
    c.threads = host.cpu_count();
    c.repetitions = 11;
    c.placement = Strategy::Sparse;
    const RunResult sparse = execute_run(c, options);
    c.placement = Strategy::None;
    const RunResult none = execute_run(c, options);
    const double cv_s = coefficient_of_variation(sparse), cv_n = coefficient_of_variation(none);
    std::ostringstream what;
    what << std::setprecision(3) << "affinity stability, W1 x10 at T=" << c.threads << ": CV Sparse " << cv_s * 100
         << "% vs None " << cv_n * 100 << "%";
    if (sparse.migrations && none.migrations)
        what << ", migrations " << *sparse.migrations << " vs " << *none.migrations;
    report(9, cv_s < cv_n ? Verdict::Pass : Verdict::Fail, what.str());
}

}  // namespace

int main() {
    const std::pair<int, void (*)()> criteria[] = {{1, ac1}, {2, ac2}, {3, ac3}, {4, ac4}, {5, ac5},
                                                   {6, ac6}, {7, ac7}, {8, ac8}, {9, ac9}};
    for (const auto& [id, fn] : criteria) {
        try {
            fn();
        } catch (const std::exception& e) {
            report(id, Verdict::Fail, std::string("threw: ") + e.what());
        }
    }
    return failures == 0 ? 0 : 1;
}
