#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "numabench/datagen.hpp"
#include "numabench/morsel.hpp"
#include "numabench/placement.hpp"
#include "numabench/radix_index.hpp"

namespace numabench {

enum class Workload { W1, W2, W3, W4, Microbench };

std::string to_string(Workload w);
Workload parse_workload(const std::string& text);

enum class AggKind {
    Holistic,      // MEDIAN(val)
    Distributive,  // COUNT(val)
};

struct AggResult {
    /// (group key, aggregate) sorted by key. Median of an even-sized group is
    /// the lower of the two middle values.
    std::vector<std::pair<std::uint64_t, std::uint64_t>> groups;
    double elapsed = 0.0;  // seconds, aggregation + finalization only
    /// Maximum live bytes held by the hash table; only filled when tracking
    /// was requested.
    std::uint64_t peak_requested = 0;

    std::optional<std::uint64_t> find(std::uint64_t key) const;
};

struct JoinResult {
    std::uint64_t match_count = 0;
    double elapsed = 0.0;        // seconds; build + probe for the hash join
    double build_elapsed = 0.0;  // hash join only
    double probe_elapsed = 0.0;
};

/// Per-worker callbacks around the measured phase, invoked on the worker
/// thread after pinning (start) and after its share of work (stop).
class WorkerHooks {
public:
    virtual ~WorkerHooks() = default;
    virtual void start(std::size_t thread) = 0;
    virtual void stop(std::size_t thread) = 0;
};

struct KernelOptions {
    std::size_t morsel = MorselQueue::kDefaultMorsel;
    /// Account requested bytes of the aggregation table (adds shared atomics
    /// to the hot path; keep off when timing).
    bool track_requested = false;
    WorkerHooks* hooks = nullptr;
};

/// Spawns exactly `threads` workers; each pins itself per `plan` before
/// touching data, all start on a barrier. `plan` must be Strategy::None or
/// hold one cpu per thread.
AggResult run_aggregation(std::span<const Record> dataset, AggKind kind, std::size_t threads,
                          const PlacementPlan& plan, const KernelOptions& options = {});

/// Non-partitioning hash join: a shared open-addressing table is built from
/// `build` in parallel, then probed in parallel with `probe`.
JoinResult run_hash_join(std::span<const Record> build, std::span<const Record> probe, std::size_t threads,
                         const PlacementPlan& plan, const KernelOptions& options = {});

/// Single-threaded; throws ConfigError on a duplicate key.
RadixIndex build_index(std::span<const Record> build);

/// Parallel point lookups of every probe key into a pre-built index. Index
/// construction is not part of the timing.
JoinResult run_index_join(const RadixIndex& index, std::span<const Record> probe, std::size_t threads,
                          const PlacementPlan& plan, const KernelOptions& options = {});

namespace reference {

/// Serial std::map based aggregation; the oracle for run_aggregation.
AggResult oracle_aggregate(std::span<const Record> dataset, AggKind kind);

/// O(|build| x |probe|) nested loop; the oracle for both joins.
std::uint64_t oracle_join(std::span<const Record> build, std::span<const Record> probe);

}  // namespace reference

}  // namespace numabench
