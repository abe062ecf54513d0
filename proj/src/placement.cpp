#include "numabench/placement.hpp"

#include <numaif.h>
#include <pthread.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <regex>
#include <sstream>

#include "numabench/error.hpp"

#ifndef MPOL_LOCAL
#define MPOL_LOCAL 4
#endif

namespace numabench {

std::string to_string(Strategy s) {
    switch (s) {
    case Strategy::None: return "None";
    case Strategy::Sparse: return "Sparse";
    case Strategy::Dense: return "Dense";
    }
    return "?";
}

Strategy parse_strategy(const std::string& text) {
    std::string t = text;
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    if (t == "none") return Strategy::None;
    if (t == "sparse") return Strategy::Sparse;
    if (t == "dense") return Strategy::Dense;
    throw ConfigError("unknown placement strategy '" + text + "'");
}

namespace {

// Node's logical cpus ordered physical-first: the first sibling of every
// core, then the second sibling of every core, ...
std::vector<std::vector<int>> sibling_levels(const Topology& topo, int node) {
    std::vector<std::vector<int>> levels;
    for (const auto& core : topo.cores_of(node)) {
        for (std::size_t k = 0; k < core.size(); ++k) {
            if (levels.size() <= k) levels.emplace_back();
            levels[k].push_back(core[k]);
        }
    }
    return levels;
}

std::vector<int> sparse_order(const Topology& topo) {
    std::vector<std::vector<std::vector<int>>> per_node;
    std::size_t depth = 0;
    for (const auto& node : topo.nodes()) {
        per_node.push_back(sibling_levels(topo, node.id));
        depth = std::max(depth, per_node.back().size());
    }
    std::vector<int> order;
    for (std::size_t level = 0; level < depth; ++level) {
        for (std::size_t round = 0;; ++round) {
            bool any = false;
            for (const auto& levels : per_node) {
                if (level < levels.size() && round < levels[level].size()) {
                    order.push_back(levels[level][round]);
                    any = true;
                }
            }
            if (!any) break;
        }
    }
    return order;
}

std::vector<int> dense_order(const Topology& topo) {
    std::vector<int> order;
    for (const auto& node : topo.nodes())
        for (const auto& level : sibling_levels(topo, node.id)) order.insert(order.end(), level.begin(), level.end());
    return order;
}

}  // namespace

PlacementPlan plan_threads(const Topology& topology, Strategy strategy, std::size_t threads) {
    if (threads == 0) throw ConfigError("thread count must be >= 1");
    PlacementPlan plan;
    plan.strategy = strategy;
    if (strategy == Strategy::None) return plan;
    std::vector<int> order;
    switch (strategy) {
    case Strategy::Sparse: order = sparse_order(topology); break;
    case Strategy::Dense: order = dense_order(topology); break;
    default: throw ConfigError("unknown placement strategy");
    }
    if (order.empty()) throw ConfigError("topology has no cpus to place threads on");
    plan.oversubscribed = threads > order.size();
    plan.assignment.reserve(threads);
    for (std::size_t i = 0; i < threads; ++i) plan.assignment.push_back(order[i % order.size()]);
    return plan;
}

std::vector<int> current_affinity() {
    cpu_set_t set;
    CPU_ZERO(&set);
    if (pthread_getaffinity_np(pthread_self(), sizeof(set), &set) != 0) return {};
    std::vector<int> cpus;
    for (int c = 0; c < CPU_SETSIZE; ++c)
        if (CPU_ISSET(c, &set)) cpus.push_back(c);
    return cpus;
}

std::optional<int> apply_affinity(const PlacementPlan& plan, std::size_t thread_index) {
    if (plan.strategy == Strategy::None) return std::nullopt;
    if (thread_index >= plan.assignment.size())
        throw ConfigError("thread index " + std::to_string(thread_index) + " outside placement plan");
    const int cpu = plan.assignment[thread_index];
    if (cpu < 0 || cpu >= CPU_SETSIZE) throw AffinityError(cpu, "cpu id out of range: " + std::to_string(cpu));
    cpu_set_t set;
    CPU_ZERO(&set);
    CPU_SET(cpu, &set);
    if (int rc = pthread_setaffinity_np(pthread_self(), sizeof(set), &set); rc != 0)
        throw AffinityError(cpu, "cannot pin thread to cpu " + std::to_string(cpu) + ": " + std::strerror(rc));
    auto mask = current_affinity();
    if (mask.size() != 1 || mask.front() != cpu)
        throw AffinityError(cpu, "affinity readback mismatch for cpu " + std::to_string(cpu));
    return cpu;
}

AffinityGuard::AffinityGuard(const PlacementPlan& plan, std::size_t thread_index) {
    if (plan.strategy == Strategy::None) return;
    CPU_ZERO(&saved_);
    restore_ = pthread_getaffinity_np(pthread_self(), sizeof(saved_), &saved_) == 0;
    cpu_ = apply_affinity(plan, thread_index);
}

AffinityGuard::~AffinityGuard() {
    if (restore_) pthread_setaffinity_np(pthread_self(), sizeof(saved_), &saved_);
}

std::string to_string(const MemPolicy& p) {
    switch (p.kind) {
    case MemPolicyKind::FirstTouch: return "FirstTouch";
    case MemPolicyKind::Interleave: return "Interleave";
    case MemPolicyKind::LocalAlloc: return "LocalAlloc";
    case MemPolicyKind::Preferred: return "Preferred" + std::to_string(p.node);
    }
    return "?";
}

MemPolicy parse_mempolicy(const std::string& text) {
    std::string t = text;
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    t.erase(std::remove_if(t.begin(), t.end(), [](char c) { return c == '-' || c == '_'; }), t.end());
    if (t == "firsttouch" || t == "default") return {MemPolicyKind::FirstTouch, 0};
    if (t == "interleave" || t == "interleaved") return {MemPolicyKind::Interleave, 0};
    if (t == "localalloc" || t == "local") return {MemPolicyKind::LocalAlloc, 0};
    static const std::regex pref(R"(preferred:?(\d+))");
    std::smatch m;
    if (std::regex_match(t, m, pref)) return {MemPolicyKind::Preferred, std::stoi(m[1])};
    throw ConfigError("unknown memory policy '" + text + "'");
}

namespace {

constexpr std::size_t kMaskWords = 16;  // up to 1024 nodes

long set_policy(int mode, const std::vector<int>& nodes) {
    unsigned long mask[kMaskWords] = {};
    for (int n : nodes) mask[n / (8 * sizeof(unsigned long))] |= 1UL << (n % (8 * sizeof(unsigned long)));
    const unsigned long maxnode = nodes.empty() ? 0 : kMaskWords * 8 * sizeof(unsigned long);
    return set_mempolicy(mode, nodes.empty() ? nullptr : mask, maxnode);
}

}  // namespace

MemPolicyOutcome apply_mempolicy(const MemPolicy& policy, const Topology& topology) {
    MemPolicyOutcome out{policy, policy, false, {}};
    if (policy.kind == MemPolicyKind::Preferred &&
        (policy.node < 0 || policy.node >= static_cast<int>(topology.node_count())))
        throw ConfigError("preferred node " + std::to_string(policy.node) + " does not exist");
    if (static_cast<std::size_t>(policy.node) >= kMaskWords * 8 * sizeof(unsigned long))
        throw ConfigError("node id too large");

    long rc = 0;
    switch (policy.kind) {
    case MemPolicyKind::FirstTouch: rc = set_policy(MPOL_DEFAULT, {}); break;
    case MemPolicyKind::Interleave: {
        std::vector<int> nodes;
        for (const auto& n : topology.nodes())
            if (n.mem_total > 0) nodes.push_back(n.id);
        if (nodes.empty())
            for (const auto& n : topology.nodes()) nodes.push_back(n.id);
        rc = set_policy(MPOL_INTERLEAVE, nodes);
        break;
    }
    case MemPolicyKind::LocalAlloc: rc = set_policy(MPOL_LOCAL, {}); break;
    case MemPolicyKind::Preferred: rc = set_policy(MPOL_PREFERRED, {policy.node}); break;
    }
    if (rc != 0) {
        const int err = errno;
        out.fell_back = true;
        out.applied = MemPolicy{};
        out.warning = "memory policy " + to_string(policy) + " not applied (" + std::strerror(err) +
                      "); using first-touch";
        set_policy(MPOL_DEFAULT, {});
    }
    return out;
}

std::vector<int> page_nodes(std::span<const std::byte> region) {
    const long page = sysconf(_SC_PAGESIZE);
    const auto begin = reinterpret_cast<std::uintptr_t>(region.data()) & ~static_cast<std::uintptr_t>(page - 1);
    const auto end = reinterpret_cast<std::uintptr_t>(region.data() + region.size());
    std::vector<void*> pages;
    for (std::uintptr_t p = begin; p < end; p += static_cast<std::uintptr_t>(page))
        pages.push_back(reinterpret_cast<void*>(p));
    std::vector<int> status(pages.size(), -1);
    constexpr std::size_t kBatch = 4096;
    for (std::size_t off = 0; off < pages.size(); off += kBatch) {
        const std::size_t count = std::min(kBatch, pages.size() - off);
        if (move_pages(0, count, pages.data() + off, nullptr, status.data() + off, 0) != 0) {
            std::fill(status.begin() + static_cast<std::ptrdiff_t>(off), status.end(), -1);
            break;
        }
    }
    for (auto& s : status)
        if (s < 0) s = -1;
    return status;
}

std::map<int, std::uint64_t> parse_numa_maps(const std::string& text) {
    std::map<int, std::uint64_t> kib;
    static const std::regex node_re(R"(\bN(\d+)=(\d+))");
    static const std::regex size_re(R"(\bkernelpagesize_kB=(\d+))");
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        std::uint64_t page_kib = 4;
        std::smatch m;
        if (std::regex_search(line, m, size_re)) page_kib = std::stoull(m[1]);
        for (auto it = std::sregex_iterator(line.begin(), line.end(), node_re); it != std::sregex_iterator(); ++it)
            kib[std::stoi((*it)[1])] += std::stoull((*it)[2]) * page_kib;
    }
    return kib;
}

}  // namespace numabench
