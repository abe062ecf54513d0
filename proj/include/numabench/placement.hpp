#pragma once

#include <sched.h>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "numabench/topology.hpp"

namespace numabench {

enum class Strategy { None, Sparse, Dense };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& text);

/// Thread -> processor assignment. Empty for Strategy::None.
struct PlacementPlan {
    Strategy strategy = Strategy::None;
    std::vector<int> assignment;
    /// More threads than logical cpus; assignment wrapped around.
    bool oversubscribed = false;

    static PlacementPlan none() { return {}; }
    bool operator==(const PlacementPlan&) const = default;
};

/// Sparse: round-robin over nodes, one physical core at a time; SMT siblings
/// are used only after every physical core on every node is taken.
/// Dense: fill every logical cpu of node 0 (physical cores first), then
/// node 1, and so on. Both wrap modulo capacity when oversubscribed.
PlacementPlan plan_threads(const Topology& topology, Strategy strategy, std::size_t threads);

/// Pins the calling thread to `plan.assignment[thread_index]` and verifies by
/// reading the mask back. Returns the pinned cpu, or nullopt for Strategy::None.
/// Throws AffinityError when the OS rejects the mask.
std::optional<int> apply_affinity(const PlacementPlan& plan, std::size_t thread_index);

/// Current affinity mask of the calling thread, ascending.
std::vector<int> current_affinity();

/// Pins on construction, restores the previous mask on destruction. Worker
/// pools that outlive a kernel (OpenMP) would otherwise keep stale pins.
class AffinityGuard {
public:
    AffinityGuard(const PlacementPlan& plan, std::size_t thread_index);
    ~AffinityGuard();
    AffinityGuard(const AffinityGuard&) = delete;
    AffinityGuard& operator=(const AffinityGuard&) = delete;

    std::optional<int> cpu() const noexcept { return cpu_; }

private:
    std::optional<int> cpu_;
    cpu_set_t saved_{};
    bool restore_ = false;
};

enum class MemPolicyKind { FirstTouch, Interleave, LocalAlloc, Preferred };

struct MemPolicy {
    MemPolicyKind kind = MemPolicyKind::FirstTouch;
    int node = 0;  // Preferred only

    bool operator==(const MemPolicy&) const = default;
};

std::string to_string(const MemPolicy& p);
/// Accepts firsttouch, interleave, localalloc, preferred<N> / preferred:<N>.
MemPolicy parse_mempolicy(const std::string& text);

struct MemPolicyOutcome {
    MemPolicy requested;
    MemPolicy applied;
    bool fell_back = false;
    std::string warning;
};

/// Installs the policy for the calling thread; threads spawned afterwards
/// inherit it, so call this before any worker pool exists.
/// Interleave spans every node of `topology`; FirstTouch restores the kernel
/// default. An unsupported kernel downgrades to FirstTouch with a warning.
MemPolicyOutcome apply_mempolicy(const MemPolicy& policy, const Topology& topology);

/// Node currently backing each page of `region` (-1 when not resident or
/// unknown). Pages must already be touched.
std::vector<int> page_nodes(std::span<const std::byte> region);

/// Resident KiB per node summed over a numa_maps report (page counts are
/// scaled by each mapping's kernelpagesize_kB).
std::map<int, std::uint64_t> parse_numa_maps(const std::string& text);

}  // namespace numabench
