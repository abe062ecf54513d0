#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "numabench/os_config.hpp"
#include "numabench/runner.hpp"
#include "numabench/topology.hpp"

namespace numabench {

enum class Severity { Info, Warn };
std::string to_string(Severity s);

struct Finding {
    std::string id;
    Severity severity = Severity::Info;
    std::string observed;
    std::string rationale;
};

/// Host audit. Warns on THP=always and on NUMA balancing with two or more
/// nodes; Unknown states and single-node hosts yield info findings only.
std::vector<Finding> audit(const Topology& topo, const OsConfig& os);

/// One allocator's calibration outcome. `error` set means the run failed.
struct CalibrationSample {
    AllocatorSpec allocator;
    double elapsed = 0.0;
    double overhead_ratio = 0.0;
    std::optional<std::string> error;
};

struct RankedAllocator {
    AllocatorSpec allocator;
    double elapsed = 0.0;
    double overhead_ratio = 0.0;
};

struct Ranking {
    std::vector<RankedAllocator> ranked;  // elapsed ascending
    std::vector<Finding> findings;        // one per excluded allocator
};

inline constexpr double kDefaultOverheadCap = 2.0;

/// Drops failed samples and those above `overhead_cap`, then sorts by elapsed
/// (ties by id).
Ranking rank_allocators(std::span<const CalibrationSample> samples, double overhead_cap = kDefaultOverheadCap);

/// Runs the microbenchmark once per allocator through the runner and ranks
/// the outcomes. Failing allocators are excluded, never fatal.
Ranking calibrate(std::span<const AllocatorSpec> allocators, const MicrobenchConfig& config,
                  const RunnerOptions& runner, std::size_t repetitions = 3,
                  double overhead_cap = kDefaultOverheadCap);

enum class WorkloadHint { AllocationHeavy, AllocationLight };
WorkloadHint parse_hint(const std::string& text);

struct Recommendation {
    std::string id;  // disable-thp, disable-numa-balancing, use-interleave, pin-sparse, use-allocator
    Severity severity = Severity::Info;
    std::string action;
    std::string cites;  // finding id or "ranking:<allocator>"
    std::optional<std::string> mitigation;
    std::optional<AllocatorSpec> allocator;
};

struct RecommendOptions {
    WorkloadHint hint = WorkloadHint::AllocationHeavy;
    bool privileged = false;
    std::string current_allocator = "system";
};

/// Priority order: disable THP, disable NUMA balancing, Interleave, Sparse,
/// allocator override. NUMA advice needs the multi-node finding.
std::vector<Recommendation> recommend(std::span<const Finding> findings, const Ranking& ranking,
                                      const RecommendOptions& options = {});

/// Environment plus runner flags that realize the unprivileged part, followed
/// by the root-only writes.
std::string emit_prefix(std::span<const Recommendation> recs, const OsConfigPaths& paths = {});

struct AdvisorReport {
    std::vector<Finding> findings;
    Ranking ranking;
    std::vector<Recommendation> recommendations;
    std::string prefix;
};

std::string report_text(const AdvisorReport& report);
nlohmann::json report_json(const AdvisorReport& report);

/// "system" first, then the entries of `config` (a JSON array of paths or of
/// {"id","path"} objects), then well-known system locations that exist.
std::vector<AllocatorSpec> discover_allocators(const std::optional<std::filesystem::path>& config);

}  // namespace numabench
