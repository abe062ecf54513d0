#pragma once

#include <sys/types.h>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "numabench/allocbench.hpp"
#include "numabench/datagen.hpp"
#include "numabench/os_config.hpp"
#include "numabench/placement.hpp"
#include "numabench/workloads.hpp"

namespace numabench {

inline constexpr const char* kRunSchema = "numabench.run/1";

enum class Scale { Desk, Paper };
Scale parse_scale(const std::string& text);

/// "system" (no preload) or a named shared object injected with LD_PRELOAD.
struct AllocatorSpec {
    std::string id = "system";
    std::string path;

    bool is_default() const noexcept { return path.empty(); }
    bool operator==(const AllocatorSpec&) const = default;
};

/// One cell of the experiment matrix.
struct ExperimentConfig {
    Workload workload = Workload::W1;
    AggDatasetSpec agg;           // W1, W2
    JoinDatasetSpec join;         // W3, W4
    MicrobenchConfig microbench;  // Microbench; threads and seed come from this config
    std::size_t threads = 1;
    Strategy placement = Strategy::Sparse;
    MemPolicy mempolicy;
    AllocatorSpec allocator;
    std::size_t repetitions = 4;  // rep 0 is the cold run
    std::uint64_t seed = 42;

    /// Throws ConfigError on repetitions < 2, threads == 0, a missing
    /// allocator object or an invalid dataset spec.
    void validate() const;
    /// Dataset label for reports (distribution name, "join" or "microbench").
    std::string dataset_label() const;
    bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Dimensions of the experiment matrix. Unset dimensions take the default
/// experiment parameters: W1, MovingCluster, Sparse, FirstTouch, system allocator.
struct MatrixSpec {
    std::vector<Workload> workloads{Workload::W1};
    std::vector<Distribution> distributions{Distribution::MovingCluster};
    std::vector<std::size_t> threads{1};
    std::vector<Strategy> placements{Strategy::Sparse};
    std::vector<MemPolicy> policies{MemPolicy{}};
    std::vector<AllocatorSpec> allocators{AllocatorSpec{}};
    std::size_t repetitions = 4;
    std::uint64_t seed = 42;
    AggDatasetSpec agg;
    JoinDatasetSpec join;
    MicrobenchConfig microbench;

    /// Missing keys keep their defaults; an empty array is an error.
    static MatrixSpec from_json(const nlohmann::json& j, Scale scale, std::size_t default_threads);
};

/// Cartesian product, nested workload > distribution > threads > placement >
/// policy > allocator (allocator varies fastest). The distribution dimension
/// only applies to W1/W2.
std::vector<ExperimentConfig> expand_matrix(const MatrixSpec& spec);

struct Summary {
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
    std::size_t count = 0;
};

/// Statistics over reps 1..N-1; rep 0 (cold) is ignored. Needs >= 2 values.
Summary summarize_reps(std::span<const double> elapsed);

enum class LocalitySource { Counters, PageProxy };
std::string to_string(LocalitySource s);

struct Locality {
    double value = 0.0;
    LocalitySource source = LocalitySource::PageProxy;
};

/// Fraction of resident memory on `bound_nodes`; nullopt when nothing is resident.
std::optional<double> page_locality(const std::map<int, std::uint64_t>& node_kib, const std::set<int>& bound_nodes);

/// Counter-based LAR when the child measured one, otherwise the page proxy
/// read from /proc/<pid>/numa_maps. nullopt when neither is available.
std::optional<Locality> measure_locality(pid_t pid, const std::set<int>& bound_nodes,
                                         std::optional<double> counter_lar);

struct RepResult {
    double elapsed = 0.0;
    std::uint64_t peak_rss = 0;
    std::optional<Locality> locality;
    std::optional<std::uint64_t> migrations;
    std::optional<std::uint64_t> cache_misses;
    nlohmann::json detail;  // workload specific (match counts, overhead ratio, ...)
};

struct RunResult {
    ExperimentConfig config;
    OsConfig os;
    std::vector<RepResult> reps;
    Summary summary;
    std::uint64_t peak_rss = 0;  // max over measured reps
    std::optional<Locality> locality;        // mean over measured reps
    std::optional<double> migrations;        // mean over measured reps
    bool mempolicy_fell_back = false;
    bool oversubscribed = false;
    std::vector<std::string> warnings;
};

nlohmann::json to_json(const RunResult& r);
RunResult run_from_json(const nlohmann::json& j);

/// Fills summary, peak_rss, locality and migrations from `reps`.
void finalize_run(RunResult& r);

struct RunnerOptions {
    /// Executable that implements the hidden `cell` subcommand.
    std::filesystem::path worker_exe;
    std::optional<std::filesystem::path> topology_fixture;
    std::filesystem::path scratch_dir = std::filesystem::temp_directory_path();
    /// Base environment for children; defaults to the parent's environment.
    std::optional<std::vector<std::string>> base_env;
};

/// Path of the running executable.
std::filesystem::path self_executable();

/// Child environment: `base` without any LD_PRELOAD entry, plus one for a
/// non-default allocator.
std::vector<std::string> child_environment(const AllocatorSpec& allocator, const std::vector<std::string>& base);

/// Runs every repetition in a fresh child process and collects its timings,
/// peak RSS, locality and migrations. The parent never runs workload code.
RunResult execute_run(const ExperimentConfig& config, const RunnerOptions& options);

struct SummaryRow {
    std::string workload;
    std::string dataset;
    std::size_t threads = 0;
    std::string allocator;
    std::string mempolicy;
    std::string placement;
    Summary elapsed;
    std::uint64_t peak_rss = 0;
    std::optional<Locality> locality;
    std::optional<double> migrations;
    double relative = 1.0;  // mean / baseline mean
};

/// One row per result; relative column against `baseline` (index into results).
/// Throws ConfigError on an empty list or mixed workloads.
std::vector<SummaryRow> summarize(std::span<const RunResult> results, std::size_t baseline = 0);

std::string summary_csv(std::span<const SummaryRow> rows, bool header = true);
std::string summary_text(std::span<const SummaryRow> rows);

/// Writes runs.jsonl and summary.csv (one summary block per workload).
void write_results(const std::filesystem::path& dir, std::span<const RunResult> results);
std::vector<RunResult> load_runs(const std::filesystem::path& runs_jsonl);

/// Child side of execute_run: runs one repetition of `config`, reporting over
/// `out` and waiting on `in` for the parent to finish sampling. Returns the
/// process exit status.
int run_cell(const ExperimentConfig& config, const std::optional<std::filesystem::path>& topology_fixture,
             std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace numabench
