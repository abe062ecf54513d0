#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "numabench/advisor.hpp"
#include "numabench/allocbench.hpp"
#include "numabench/datagen.hpp"
#include "numabench/error.hpp"
#include "numabench/placement.hpp"
#include "numabench/runner.hpp"
#include "numabench/topology.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace numabench;

namespace {

struct Globals {
    std::uint64_t seed = 42;
    std::string scale = "desk";
    std::optional<std::string> fixture;
    std::string format = "text";

    Scale parsed_scale() const { return parse_scale(scale); }
    std::optional<fs::path> fixture_path() const {
        if (!fixture) return std::nullopt;
        return fs::path(*fixture);
    }
    bool as_json() const { return format == "json"; }
};

std::string format_cpulist(const std::vector<int>& cpus) {
    std::string out;
    for (std::size_t i = 0; i < cpus.size();) {
        std::size_t j = i;
        while (j + 1 < cpus.size() && cpus[j + 1] == cpus[j] + 1) ++j;
        if (!out.empty()) out += ',';
        out += std::to_string(cpus[i]);
        if (j > i) out += '-' + std::to_string(cpus[j]);
        i = j + 1;
    }
    return out;
}

int cmd_topo(const Globals& g, const std::optional<std::string>& plan_strategy, std::size_t plan_threads_n) {
    const Topology topo = discover_or_load(g.fixture_path());
    std::optional<PlacementPlan> plan;
    if (plan_strategy) plan = plan_threads(topo, parse_strategy(*plan_strategy), plan_threads_n);
    if (g.as_json()) {
        json j = json::parse(topo.serialize());
        if (plan)
            j["plan"] = {{"strategy", to_string(plan->strategy)},
                         {"assignment", plan->assignment},
                         {"oversubscribed", plan->oversubscribed}};
        std::cout << j.dump(2) << '\n';
        return 0;
    }
    std::cout << std::left << std::setw(6) << "node" << std::setw(20) << "cpus" << "mem_MiB\n";
    for (const auto& n : topo.nodes())
        std::cout << std::setw(6) << n.id << std::setw(20) << format_cpulist(n.cpus) << n.mem_total / (1024 * 1024)
                  << '\n';
    std::cout << "\ndistance\n" << std::right << std::setw(4) << "";
    for (const auto& n : topo.nodes()) std::cout << std::setw(7) << n.id;
    std::cout << '\n' << std::fixed << std::setprecision(3);
    for (const auto& a : topo.nodes()) {
        std::cout << std::setw(4) << a.id;
        for (const auto& b : topo.nodes()) std::cout << std::setw(7) << topo.distance(a.id, b.id);
        std::cout << '\n';
    }
    if (plan) {
        std::cout << "\nplan " << to_string(plan->strategy) << " T=" << plan->assignment.size() << ":";
        for (int cpu : plan->assignment) std::cout << ' ' << cpu;
        if (plan->oversubscribed) std::cout << " (oversubscribed)";
        std::cout << '\n';
    }
    return 0;
}

struct GenArgs {
    std::string dataset = "moving-cluster";
    std::optional<std::uint64_t> n, c, build_n, probe_n, w;
    std::optional<double> e;
    std::string out;
};

int cmd_gen(const Globals& g, const GenArgs& a) {
    fs::create_directories(a.out);
    json manifest;
    if (a.dataset == "join") {
        JoinDatasetSpec spec = g.parsed_scale() == Scale::Paper ? JoinDatasetSpec::paper_scale()
                                                                : JoinDatasetSpec::with_ratio(1'000'000);
        spec.seed = g.seed;
        if (a.build_n) {
            spec.build_n = *a.build_n;
            spec.probe_n = 16 * *a.build_n;
        }
        if (a.probe_n) spec.probe_n = *a.probe_n;
        const JoinTables t = generate_join(spec);
        dump_records(t.build, fs::path(a.out) / "build.bin");
        dump_records(t.probe, fs::path(a.out) / "probe.bin");
        manifest = {{"dataset", "join"}, {"build_n", spec.build_n}, {"probe_n", spec.probe_n}, {"seed", spec.seed},
                    {"files", {"build.bin", "probe.bin"}}};
    } else {
        const Distribution d = parse_distribution(a.dataset);
        AggDatasetSpec spec = g.parsed_scale() == Scale::Paper ? AggDatasetSpec::paper_scale(d) : AggDatasetSpec{};
        spec.distribution = d;
        spec.seed = g.seed;
        if (a.n) spec.n = *a.n;
        if (a.c) spec.c = *a.c;
        if (a.e) spec.e = *a.e;
        spec.w = a.w ? *a.w : std::min(spec.w, spec.c);
        const Dataset data = generate_agg(spec);
        dump_records(data, fs::path(a.out) / "records.bin");
        manifest = {{"dataset", to_string(d)}, {"n", spec.n},   {"c", spec.c},
                    {"e", spec.e},             {"w", spec.w},   {"seed", spec.seed},
                    {"files", {"records.bin"}}};
    }
    manifest["rng"] = Rng::kAlgorithm;
    manifest["record_format"] = "u64le key, u64le value";
    std::ofstream(fs::path(a.out) / "manifest.json") << manifest.dump(2) << '\n';
    if (g.as_json())
        std::cout << manifest.dump(2) << '\n';
    else
        std::cout << "wrote " << manifest["files"].dump() << " to " << a.out << '\n';
    return 0;
}

struct RunArgs {
    std::optional<std::string> matrix;
    std::string out;
    std::vector<std::string> workloads, placements, policies, allocators;
    std::vector<std::size_t> threads;
    std::optional<std::size_t> repetitions;
};

int cmd_run(const Globals& g, const RunArgs& a) {
    json j = json::object();
    if (a.matrix) {
        std::ifstream in(*a.matrix);
        if (!in) throw ConfigError("cannot read matrix " + *a.matrix);
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError(*a.matrix + ": " + e.what());
        }
    }
    auto override_dim = [&](const char* key, const auto& values) {
        if (!values.empty()) j[key] = values;
    };
    override_dim("workloads", a.workloads);
    override_dim("placements", a.placements);
    override_dim("policies", a.policies);
    override_dim("allocators", a.allocators);
    override_dim("threads", a.threads);
    if (a.repetitions) j["repetitions"] = *a.repetitions;
    if (!j.contains("seed")) j["seed"] = g.seed;

    const Topology topo = discover_or_load(g.fixture_path());
    const MatrixSpec spec = MatrixSpec::from_json(j, g.parsed_scale(), topo.cpu_count());
    const auto cells = expand_matrix(spec);
    for (const auto& c : cells) c.validate();

    RunnerOptions options;
    options.worker_exe = self_executable();
    options.topology_fixture = g.fixture_path();

    std::vector<RunResult> results;
    int failures = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& c = cells[i];
        std::cerr << "[" << i + 1 << "/" << cells.size() << "] " << to_string(c.workload) << ' '
                  << c.dataset_label() << " T=" << c.threads << ' ' << to_string(c.placement) << ' '
                  << to_string(c.mempolicy) << ' ' << c.allocator.id << '\n';
        try {
            results.push_back(execute_run(c, options));
            for (const auto& w : results.back().warnings) std::cerr << "  warning: " << w << '\n';
        } catch (const Error& e) {
            ++failures;
            std::cerr << "  failed: " << e.what() << '\n';
        }
    }
    if (!results.empty()) {
        write_results(a.out, results);
        std::vector<Workload> seen;
        for (const auto& r : results) {
            if (std::find(seen.begin(), seen.end(), r.config.workload) != seen.end()) continue;
            seen.push_back(r.config.workload);
            std::vector<RunResult> group;
            for (const auto& x : results)
                if (x.config.workload == r.config.workload) group.push_back(x);
            const auto rows = summarize(group);
            if (!g.as_json()) std::cout << summary_text(rows) << '\n';
        }
        if (g.as_json())
            for (const auto& r : results) std::cout << to_json(r).dump() << '\n';
    }
    std::cerr << "results in " << a.out << " (" << results.size() << " ok, " << failures << " failed)\n";
    return failures == 0 ? 0 : 1;
}

struct MicrobenchArgs {
    std::optional<std::size_t> threads;
    std::optional<std::uint64_t> ops;
    std::optional<std::size_t> live_cap;
    std::string placement = "sparse";
};

int cmd_microbench(const Globals& g, const MicrobenchArgs& a) {
    const Topology topo = discover_or_load(g.fixture_path());
    MicrobenchConfig config = g.parsed_scale() == Scale::Paper ? MicrobenchConfig::paper_scale() : MicrobenchConfig{};
    config.threads = a.threads.value_or(topo.cpu_count());
    config.seed = g.seed;
    if (a.ops) config.ops_per_thread = *a.ops;
    if (a.live_cap) config.live_cap = *a.live_cap;
    config.validate();
    const PlacementPlan plan = plan_threads(topo, parse_strategy(a.placement), config.threads);
    const MicrobenchResult r = run_microbench(config, plan);
    if (g.as_json()) {
        std::cout << json{{"threads", config.threads},
                          {"ops_per_thread", config.ops_per_thread},
                          {"elapsed", r.elapsed},
                          {"peak_rss", r.peak_rss},
                          {"peak_requested", r.peak_requested},
                          {"sampled_concurrent_peak", r.sampled_concurrent_peak},
                          {"ops_completed", r.ops_completed},
                          {"overhead_ratio", r.overhead_ratio},
                          {"valid", r.valid}}
                         .dump(2)
                  << '\n';
    } else {
        std::cout << "threads            " << config.threads << '\n'
                  << "ops completed      " << r.ops_completed << '\n'
                  << "elapsed            " << r.elapsed << " s\n"
                  << "peak rss           " << r.peak_rss << " B\n"
                  << "peak requested     " << r.peak_requested << " B\n"
                  << "concurrent peak    " << r.sampled_concurrent_peak << " B (sampled)\n"
                  << "overhead ratio     " << r.overhead_ratio << '\n';
    }
    return r.valid ? 0 : 1;
}

struct AdviseArgs {
    std::optional<std::string> allocators;
    std::optional<std::string> calibration;
    std::optional<std::string> os_root;
    std::optional<std::string> out;
    std::optional<std::size_t> threads;
    std::string hint = "heavy";
    double cap = kDefaultOverheadCap;
    bool privileged_set = false;
};

std::vector<CalibrationSample> load_calibration(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read calibration results " + path.string());
    std::vector<CalibrationSample> out;
    try {
        for (const auto& e : json::parse(in)) {
            CalibrationSample s;
            s.allocator = {e.at("id").get<std::string>(), e.value("path", std::string{})};
            s.elapsed = e.at("elapsed").get<double>();
            s.overhead_ratio = e.at("overhead_ratio").get<double>();
            if (e.contains("error")) s.error = e["error"].get<std::string>();
            out.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return out;
}

int cmd_advise(const Globals& g, const AdviseArgs& a) {
    const Topology topo = discover_or_load(g.fixture_path());
    const OsConfigPaths paths = a.os_root ? OsConfigPaths::under(*a.os_root) : OsConfigPaths{};
    OsConfig os = read_os_config(paths);
    std::vector<Finding> findings = audit(topo, os);

    if (a.privileged_set) {
        OsConfig desired;
        if (os.thp == ThpMode::Always) desired.thp = ThpMode::Never;
        if (os.numa_balancing == Balancing::On && topo.node_count() >= 2) desired.numa_balancing = Balancing::Off;
        os = set_os_config(desired, paths);
        findings = audit(topo, os);
    }

    Ranking ranking;
    if (a.calibration) {
        ranking = rank_allocators(load_calibration(*a.calibration), a.cap);
    } else {
        const auto allocators = discover_allocators(a.allocators ? std::optional<fs::path>(*a.allocators) : std::nullopt);
        MicrobenchConfig mb = g.parsed_scale() == Scale::Paper ? MicrobenchConfig::paper_scale() : MicrobenchConfig{};
        mb.threads = a.threads.value_or(topo.cpu_count());
        mb.seed = g.seed;
        RunnerOptions options;
        options.worker_exe = self_executable();
        options.topology_fixture = g.fixture_path();
        for (const auto& al : allocators) std::cerr << "calibrating " << al.id << '\n';
        ranking = calibrate(allocators, mb, options, 3, a.cap);
    }

    RecommendOptions ro;
    ro.hint = parse_hint(a.hint);
    ro.privileged = ::geteuid() == 0;
    AdvisorReport report;
    report.findings = findings;
    report.ranking = ranking;
    report.recommendations = recommend(findings, ranking, ro);
    report.prefix = emit_prefix(report.recommendations, paths);

    if (a.out) {
        fs::create_directories(*a.out);
        std::ofstream(fs::path(*a.out) / "advice.json") << report_json(report).dump(2) << '\n';
        std::ofstream(fs::path(*a.out) / "advice.txt") << report_text(report);
    }
    if (g.as_json())
        std::cout << report_json(report).dump(2) << '\n';
    else
        std::cout << report_text(report);
    return 0;
}

int cmd_report(const Globals& g, const std::string& runs, std::size_t baseline) {
    const auto results = load_runs(runs);
    if (results.empty()) throw ConfigError(runs + " holds no runs");
    std::vector<Workload> seen;
    for (const auto& r : results) {
        if (std::find(seen.begin(), seen.end(), r.config.workload) != seen.end()) continue;
        seen.push_back(r.config.workload);
        std::vector<RunResult> group;
        for (const auto& x : results)
            if (x.config.workload == r.config.workload) group.push_back(x);
        const auto rows = summarize(group, std::min(baseline, group.size() - 1));
        std::cout << (g.as_json() ? summary_csv(rows, seen.size() == 1) : summary_text(rows) + "\n");
    }
    return 0;
}

int cmd_cell(const Globals& g, const std::string& config_json) {
    ExperimentConfig config;
    try {
        config = config_from_json(json::parse(config_json));
    } catch (const json::exception& e) {
        std::cerr << "bad cell config: " << e.what() << '\n';
        return 2;
    }
    return run_cell(config, g.fixture_path(), std::cin, std::cout, std::cerr);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"numabench: NUMA workload benchmarks, placement experiments and tuning advice"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Generator seed")->capture_default_str();
    app.add_option("--scale", g.scale, "Problem sizes")->check(CLI::IsMember({"desk", "paper"}))->capture_default_str();
    app.add_option("--topology-fixture", g.fixture, "Use a topology JSON file instead of probing the host");
    app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"text", "json"}))->capture_default_str();

    std::function<int()> action;

    auto* topo = app.add_subcommand("topo", "Show nodes, cpus and the distance matrix");
    auto plan_strategy = std::make_shared<std::optional<std::string>>();
    auto plan_threads_n = std::make_shared<std::size_t>(1);
    topo->add_option("--plan", *plan_strategy, "Also show a thread plan (none, sparse, dense)");
    topo->add_option("--threads", *plan_threads_n, "Threads for --plan")->check(CLI::PositiveNumber);
    topo->callback([&] { action = [&] { return cmd_topo(g, *plan_strategy, *plan_threads_n); }; });

    GenArgs gen_args;
    auto* gen = app.add_subcommand("gen", "Write a dataset as 16-byte little-endian records");
    gen->add_option("--dataset", gen_args.dataset, "moving-cluster, sequential, zipf or join")->capture_default_str();
    gen->add_option("--n", gen_args.n, "Records");
    gen->add_option("--c", gen_args.c, "Group-by cardinality");
    gen->add_option("--e", gen_args.e, "Zipf exponent");
    gen->add_option("--w", gen_args.w, "Moving-cluster window");
    gen->add_option("--build-n", gen_args.build_n, "Join build rows (probe defaults to 16x)");
    gen->add_option("--probe-n", gen_args.probe_n, "Join probe rows");
    gen->add_option("--out", gen_args.out, "Output directory")->required();
    gen->callback([&] { action = [&] { return cmd_gen(g, gen_args); }; });

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Run an experiment matrix, one child process per repetition");
    run->add_option("--matrix", run_args.matrix, "Matrix JSON file");
    run->add_option("--out", run_args.out, "Output directory for runs.jsonl and summary.csv")->required();
    run->add_option("--workload", run_args.workloads, "Override workloads (W1..W4, microbench)");
    run->add_option("--threads", run_args.threads, "Override thread counts");
    run->add_option("--placement", run_args.placements, "Override placements (none, sparse, dense)");
    run->add_option("--mempolicy", run_args.policies, "Override memory policies");
    run->add_option("--allocator", run_args.allocators, "Override allocators (system or a shared object path)");
    run->add_option("--repetitions", run_args.repetitions, "Repetitions per cell, first one is discarded");
    run->callback([&] { action = [&] { return cmd_run(g, run_args); }; });

    MicrobenchArgs mb_args;
    auto* mb = app.add_subcommand("microbench", "Run the allocator microbenchmark in this process");
    mb->add_option("--threads", mb_args.threads, "Threads (default: all allowed cpus)");
    mb->add_option("--ops", mb_args.ops, "Operations per thread");
    mb->add_option("--live-cap", mb_args.live_cap, "Live allocations per thread");
    mb->add_option("--placement", mb_args.placement, "none, sparse or dense")->capture_default_str();
    mb->callback([&] { action = [&] { return cmd_microbench(g, mb_args); }; });

    AdviseArgs adv_args;
    auto* adv = app.add_subcommand("advise", "Audit the host, calibrate allocators and print launch settings");
    adv->add_option("--allocators", adv_args.allocators, "JSON list of allocator shared objects");
    adv->add_option("--calibration", adv_args.calibration, "Use recorded calibration results instead of running");
    adv->add_option("--hint", adv_args.hint, "Workload allocation intensity: heavy or light")
        ->check(CLI::IsMember({"heavy", "light", "allocation-heavy", "allocation-light"}))
        ->capture_default_str();
    adv->add_option("--cap", adv_args.cap, "Allocator overhead cap (peak RSS / requested)")->capture_default_str();
    adv->add_option("--threads", adv_args.threads, "Calibration threads (default: all allowed cpus)");
    adv->add_option("--os-root", adv_args.os_root, "Read THP and balancing files below this root");
    adv->add_option("--out", adv_args.out, "Also write advice.json and advice.txt here");
    adv->add_flag("--privileged-set", adv_args.privileged_set, "Write THP=never and numa_balancing=0 (needs root)");
    adv->callback([&] { action = [&] { return cmd_advise(g, adv_args); }; });

    std::string runs_path;
    std::size_t baseline = 0;
    auto* rep = app.add_subcommand("report", "Summarize a runs.jsonl file");
    rep->add_option("--runs", runs_path, "runs.jsonl written by run")->required();
    rep->add_option("--baseline", baseline, "Row index used as the relative baseline")->capture_default_str();
    rep->callback([&] { action = [&] { return cmd_report(g, runs_path, baseline); }; });

    std::string cell_json;
    auto* cell = app.add_subcommand("cell", "");
    cell->group("");
    cell->add_option("--config-json", cell_json)->required();
    cell->callback([&] { action = [&] { return cmd_cell(g, cell_json); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        return action();
    } catch (const ConfigError& e) {
        std::cerr << "numabench: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numabench: " << e.what() << '\n';
        return 1;
    }
}
