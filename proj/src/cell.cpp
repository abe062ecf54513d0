// Child side of the runner: one repetition of one experiment cell.

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "numabench/perf_counters.hpp"
#include "numabench/proc_stats.hpp"
#include "numabench/runner.hpp"

namespace numabench {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool object_is_mapped(const fs::path& object) {
    std::error_code ec;
    const fs::path want = fs::weakly_canonical(object, ec);
    std::ifstream maps("/proc/self/maps");
    std::string line;
    while (std::getline(maps, line)) {
        const auto slash = line.find('/');
        if (slash == std::string::npos) continue;
        const fs::path mapped = line.substr(slash);
        if (mapped == want || mapped == object) return true;
    }
    return false;
}

std::set<int> bound_nodes(const Topology& topo, const PlacementPlan& plan) {
    std::set<int> nodes;
    const std::vector<int> cpus = plan.strategy == Strategy::None ? current_affinity() : plan.assignment;
    for (int cpu : cpus) {
        try {
            nodes.insert(topo.node_of_cpu(cpu));
        } catch (const std::out_of_range&) {
        }
    }
    return nodes;
}

json counters_json(const CounterTotals& t) {
    json j = json::object();
    if (t.node_loads) j["node_loads"] = *t.node_loads;
    if (t.node_load_misses) j["node_load_misses"] = *t.node_load_misses;
    if (t.cache_misses) j["cache_misses"] = *t.cache_misses;
    if (auto lar = t.local_access_ratio()) j["lar"] = *lar;
    return j;
}

}  // namespace

int run_cell(const ExperimentConfig& config, const std::optional<fs::path>& topology_fixture, std::istream& in,
             std::ostream& out, std::ostream& err) {
    try {
        if (!config.allocator.is_default() && !object_is_mapped(config.allocator.path)) {
            err << "preload object " << config.allocator.path << " was rejected by the dynamic loader\n";
            return 3;
        }
        const Topology topo = discover_or_load(topology_fixture);

        // Policy first: every later allocation (dataset, tables, worker stacks) inherits it.
        const MemPolicyOutcome policy = apply_mempolicy(config.mempolicy, topo);
        if (policy.fell_back) err << "warning: " << policy.warning << '\n';
        const PlacementPlan plan = plan_threads(topo, config.placement, config.threads);

        CounterHooks hooks(config.threads);
        KernelOptions options;
        options.hooks = &hooks;
        json detail = json::object();
        double elapsed = 0.0;

        switch (config.workload) {
        case Workload::W1:
        case Workload::W2: {
            const Dataset data = generate_agg(config.agg);
            const AggKind kind = config.workload == Workload::W1 ? AggKind::Holistic : AggKind::Distributive;
            const AggResult r = run_aggregation(data, kind, config.threads, plan, options);
            elapsed = r.elapsed;
            std::uint64_t folded = 0;
            for (const auto& [k, v] : r.groups) folded = folded * 31 + (k ^ v);
            detail = {{"groups", r.groups.size()}, {"fold", folded}};
            break;
        }
        case Workload::W3: {
            const JoinTables t = generate_join(config.join);
            const JoinResult r = run_hash_join(t.build, t.probe, config.threads, plan, options);
            elapsed = r.elapsed;
            detail = {{"match_count", r.match_count}, {"build_elapsed", r.build_elapsed}, {"probe_elapsed", r.probe_elapsed}};
            break;
        }
        case Workload::W4: {
            const JoinTables t = generate_join(config.join);
            const auto b0 = std::chrono::steady_clock::now();
            const RadixIndex index = build_index(t.build);
            const double build_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - b0).count();
            const JoinResult r = run_index_join(index, t.probe, config.threads, plan, options);
            elapsed = r.elapsed;
            detail = {{"match_count", r.match_count}, {"index_build_elapsed", build_s}};
            break;
        }
        case Workload::Microbench: {
            MicrobenchConfig mb = config.microbench;
            mb.threads = config.threads;
            const MicrobenchResult r = run_microbench(mb, plan);
            elapsed = r.elapsed;
            detail = {{"peak_requested", r.peak_requested},
                      {"sampled_concurrent_peak", r.sampled_concurrent_peak},
                      {"ops_completed", r.ops_completed},
                      {"overhead_ratio", r.overhead_ratio},
                      {"valid", r.valid}};
            break;
        }
        }

        const auto nodes = bound_nodes(topo, plan);
        json ready = {{"event", "ready"},
                      {"bound_nodes", nodes},
                      {"counters", counters_json(hooks.totals())}};
        out << ready.dump() << std::endl;

        // The parent samples numa_maps and scheduler stats while we wait here.
        std::string go;
        std::getline(in, go);

        json done = {{"event", "done"},
                     {"elapsed", elapsed},
                     {"peak_rss", proc::peak_rss().value_or(0)},
                     {"detail", detail},
                     {"mempolicy", {{"applied", to_string(policy.applied)}, {"fell_back", policy.fell_back}}},
                     {"assignment", plan.assignment},
                     {"oversubscribed", plan.oversubscribed}};
        if (policy.fell_back) done["warning"] = policy.warning;
        out << done.dump() << std::endl;
        return 0;
    } catch (const std::exception& e) {
        err << "cell failed: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace numabench
