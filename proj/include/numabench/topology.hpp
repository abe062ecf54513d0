#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace numabench {

struct NodeInfo {
    int id = 0;
    std::vector<int> cpus;
    std::uint64_t mem_total = 0;  // bytes

    bool operator==(const NodeInfo&) const = default;
};

/// NUMA layout of a machine: nodes, their processors, SMT siblings and
/// relative inter-node latency (normalized so local access = 1.0).
///
/// Immutable after construction, so it can be shared freely between threads.
class Topology {
public:
    /// Validates every invariant; throws DiscoveryError when one is violated.
    /// `siblings` maps a cpu to the sorted list of logical cpus sharing its
    /// physical core (itself included). Missing cpus are treated as having no
    /// SMT siblings.
    Topology(std::vector<NodeInfo> nodes, std::vector<std::vector<double>> distance,
             std::map<int, std::vector<int>> siblings = {});

    /// Single node holding every given cpu, distance [[1.0]].
    static Topology uniform(std::vector<int> cpus, std::uint64_t mem_total = 0);

    const std::vector<NodeInfo>& nodes() const noexcept { return nodes_; }
    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::size_t cpu_count() const noexcept { return cpu_to_node_.size(); }
    const std::vector<std::vector<double>>& distances() const noexcept { return distance_; }

    double distance(int a, int b) const;
    int node_of_cpu(int cpu) const;

    /// Logical cpus sharing a physical core with `cpu`, ascending, itself included.
    std::vector<int> siblings_of(int cpu) const;

    /// Physical cores of `node`, each as its ascending list of logical cpus.
    /// Cores are ordered by their lowest cpu id.
    std::vector<std::vector<int>> cores_of(int node) const;

    /// All cpu ids, ascending.
    std::vector<int> all_cpus() const;

    /// Canonical JSON text of the topology (the fixture format).
    std::string serialize() const;
    static Topology deserialize(const std::string& text);

    static Topology load_fixture(const std::filesystem::path& path);

    bool operator==(const Topology&) const = default;

private:
    std::vector<NodeInfo> nodes_;
    std::vector<std::vector<double>> distance_;
    std::map<int, std::vector<int>> siblings_;
    std::map<int, int> cpu_to_node_;
};

struct DiscoveryOptions {
    std::filesystem::path sysfs_root = "/sys/devices/system";
    /// Drop cpus the calling process may not run on (cgroup/cpuset limits).
    bool restrict_to_allowed = true;
};

/// Reads the host topology from sysfs. Falls back to a single node holding
/// all online cpus when the kernel exposes no node directories.
Topology discover(const DiscoveryOptions& options = {});

/// Uses the fixture when given, otherwise discovers the host.
Topology discover_or_load(const std::optional<std::filesystem::path>& fixture);

/// Parses kernel cpulist syntax ("0-3,8,10-11").
std::vector<int> parse_cpulist(const std::string& text);

}  // namespace numabench
