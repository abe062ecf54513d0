#include "numabench/topology.hpp"

#include <sched.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "json.hpp"
#include "numabench/error.hpp"

namespace numabench {

namespace fs = std::filesystem;
using nlohmann::json;

Topology::Topology(std::vector<NodeInfo> nodes, std::vector<std::vector<double>> distance,
                   std::map<int, std::vector<int>> siblings)
    : nodes_(std::move(nodes)), distance_(std::move(distance)), siblings_(std::move(siblings)) {
    if (nodes_.empty()) throw DiscoveryError("topology has no nodes");
    const std::size_t n = nodes_.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (nodes_[i].id != static_cast<int>(i))
            throw DiscoveryError("node ids must be contiguous from 0");
        std::sort(nodes_[i].cpus.begin(), nodes_[i].cpus.end());
        for (int cpu : nodes_[i].cpus) {
            if (cpu < 0) throw DiscoveryError("negative cpu id");
            if (!cpu_to_node_.emplace(cpu, nodes_[i].id).second)
                throw DiscoveryError("cpu " + std::to_string(cpu) + " appears in more than one node");
        }
    }
    if (distance_.size() != n) throw DiscoveryError("distance matrix must be N x N");
    for (std::size_t i = 0; i < n; ++i) {
        if (distance_[i].size() != n) throw DiscoveryError("distance matrix must be N x N");
        for (std::size_t j = 0; j < n; ++j) {
            if (!(distance_[i][j] > 0.0)) throw DiscoveryError("distances must be positive");
            if (distance_[i][j] != distance_[j][i]) throw DiscoveryError("distance matrix is not symmetric");
            if (distance_[i][j] < distance_[i][i])
                throw DiscoveryError("diagonal distance must be the row minimum");
        }
    }
    for (auto& [cpu, group] : siblings_) {
        std::sort(group.begin(), group.end());
        if (!cpu_to_node_.contains(cpu)) throw DiscoveryError("sibling entry for unknown cpu");
        if (!std::binary_search(group.begin(), group.end(), cpu))
            throw DiscoveryError("sibling list must contain the cpu itself");
        for (int s : group) {
            auto it = cpu_to_node_.find(s);
            if (it == cpu_to_node_.end() || it->second != cpu_to_node_.at(cpu))
                throw DiscoveryError("SMT siblings must share a node");
        }
    }
}

Topology Topology::uniform(std::vector<int> cpus, std::uint64_t mem_total) {
    return Topology({NodeInfo{0, std::move(cpus), mem_total}}, {{1.0}});
}

double Topology::distance(int a, int b) const {
    const int n = static_cast<int>(nodes_.size());
    if (a < 0 || b < 0 || a >= n || b >= n)
        throw std::out_of_range("node id out of range: " + std::to_string(a < 0 || a >= n ? a : b));
    return distance_[a][b];
}

int Topology::node_of_cpu(int cpu) const {
    auto it = cpu_to_node_.find(cpu);
    if (it == cpu_to_node_.end()) throw std::out_of_range("unknown cpu " + std::to_string(cpu));
    return it->second;
}

std::vector<int> Topology::siblings_of(int cpu) const {
    node_of_cpu(cpu);
    auto it = siblings_.find(cpu);
    if (it == siblings_.end()) return {cpu};
    return it->second;
}

std::vector<std::vector<int>> Topology::cores_of(int node) const {
    if (node < 0 || node >= static_cast<int>(nodes_.size()))
        throw std::out_of_range("node id out of range: " + std::to_string(node));
    std::vector<std::vector<int>> cores;
    std::set<int> seen;
    for (int cpu : nodes_[node].cpus) {
        if (seen.contains(cpu)) continue;
        auto group = siblings_of(cpu);
        seen.insert(group.begin(), group.end());
        cores.push_back(std::move(group));
    }
    return cores;
}

std::vector<int> Topology::all_cpus() const {
    std::vector<int> cpus;
    cpus.reserve(cpu_to_node_.size());
    for (const auto& [cpu, node] : cpu_to_node_) cpus.push_back(cpu);
    return cpus;
}

std::string Topology::serialize() const {
    json j;
    j["nodes"] = json::array();
    for (const auto& node : nodes_)
        j["nodes"].push_back({{"id", node.id}, {"cpus", node.cpus}, {"mem_total", node.mem_total}});
    j["distance"] = distance_;
    std::set<std::vector<int>> groups;
    for (const auto& [cpu, group] : siblings_)
        if (group.size() > 1) groups.insert(group);
    j["smt_groups"] = json::array();
    for (const auto& g : groups) j["smt_groups"].push_back(g);
    return j.dump(2) + "\n";
}

Topology Topology::deserialize(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
        std::vector<NodeInfo> nodes;
        for (const auto& jn : j.at("nodes"))
            nodes.push_back(NodeInfo{jn.at("id").get<int>(), jn.at("cpus").get<std::vector<int>>(),
                                     jn.value("mem_total", std::uint64_t{0})});
        auto distance = j.at("distance").get<std::vector<std::vector<double>>>();
        std::map<int, std::vector<int>> siblings;
        if (j.contains("smt_groups")) {
            for (const auto& g : j["smt_groups"]) {
                auto group = g.get<std::vector<int>>();
                for (int cpu : group) siblings[cpu] = group;
            }
        }
        return Topology(std::move(nodes), std::move(distance), std::move(siblings));
    } catch (const json::exception& e) {
        throw DiscoveryError(std::string("malformed topology fixture: ") + e.what());
    }
}

Topology Topology::load_fixture(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DiscoveryError("cannot read topology fixture " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return deserialize(ss.str());
}

std::vector<int> parse_cpulist(const std::string& text) {
    std::vector<int> cpus;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        part.erase(std::remove_if(part.begin(), part.end(), [](unsigned char c) { return std::isspace(c); }),
                   part.end());
        if (part.empty()) continue;
        int lo = 0, hi = 0;
        auto dash = part.find('-');
        auto parse = [&](std::string_view s, int& out) {
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
            if (ec != std::errc() || p != s.data() + s.size())
                throw DiscoveryError("bad cpulist entry '" + part + "'");
        };
        if (dash == std::string::npos) {
            parse(part, lo);
            hi = lo;
        } else {
            parse(std::string_view(part).substr(0, dash), lo);
            parse(std::string_view(part).substr(dash + 1), hi);
        }
        if (hi < lo) throw DiscoveryError("bad cpulist range '" + part + "'");
        for (int c = lo; c <= hi; ++c) cpus.push_back(c);
    }
    return cpus;
}

namespace {

std::optional<std::string> read_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in) return std::nullopt;
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::set<int> allowed_cpus() {
    std::set<int> out;
    cpu_set_t set;
    CPU_ZERO(&set);
    if (sched_getaffinity(0, sizeof(set), &set) != 0) return out;
    for (int c = 0; c < CPU_SETSIZE; ++c)
        if (CPU_ISSET(c, &set)) out.insert(c);
    return out;
}

std::uint64_t node_mem_total(const fs::path& node_dir) {
    auto text = read_file(node_dir / "meminfo");
    if (!text) return 0;
    static const std::regex re(R"(MemTotal:\s+(\d+)\s*kB)");
    std::smatch m;
    if (std::regex_search(*text, m, re)) return std::stoull(m[1]) * 1024;
    return 0;
}

}  // namespace

Topology discover(const DiscoveryOptions& options) {
    const fs::path node_root = options.sysfs_root / "node";
    const fs::path cpu_root = options.sysfs_root / "cpu";
    std::set<int> allowed;
    if (options.restrict_to_allowed) allowed = allowed_cpus();
    auto keep = [&](int cpu) { return allowed.empty() || allowed.contains(cpu); };

    std::map<int, fs::path> node_dirs;
    std::error_code ec;
    if (fs::is_directory(node_root, ec)) {
        static const std::regex name_re(R"(node(\d+))");
        for (const auto& entry : fs::directory_iterator(node_root, ec)) {
            std::smatch m;
            const std::string name = entry.path().filename().string();
            if (entry.is_directory() && std::regex_match(name, m, name_re))
                node_dirs.emplace(std::stoi(m[1]), entry.path());
        }
    }

    auto siblings_for = [&](const std::vector<int>& cpus) {
        std::map<int, std::vector<int>> siblings;
        for (int cpu : cpus) {
            auto text = read_file(cpu_root / ("cpu" + std::to_string(cpu)) / "topology" / "thread_siblings_list");
            if (!text) continue;
            std::vector<int> group;
            for (int s : parse_cpulist(*text))
                if (keep(s) && std::find(cpus.begin(), cpus.end(), s) != cpus.end()) group.push_back(s);
            if (group.size() > 1) siblings[cpu] = group;
        }
        return siblings;
    };

    if (node_dirs.empty()) {
        auto online = read_file(cpu_root / "online");
        std::vector<int> cpus;
        if (online) {
            for (int c : parse_cpulist(*online))
                if (keep(c)) cpus.push_back(c);
        } else if (!allowed.empty()) {
            cpus.assign(allowed.begin(), allowed.end());
        }
        if (cpus.empty()) throw DiscoveryError("topology files unreadable under " + options.sysfs_root.string());
        auto mem = static_cast<std::uint64_t>(sysconf(_SC_PHYS_PAGES)) * static_cast<std::uint64_t>(sysconf(_SC_PAGESIZE));
        auto sib = siblings_for(cpus);
        return Topology({NodeInfo{0, cpus, mem}}, {{1.0}}, std::move(sib));
    }

    std::vector<NodeInfo> nodes;
    std::vector<std::vector<double>> distance;
    std::vector<int> every_cpu;
    for (const auto& [id, dir] : node_dirs) {
        auto cpulist = read_file(dir / "cpulist");
        auto dist = read_file(dir / "distance");
        if (!cpulist || !dist) throw DiscoveryError("unreadable topology files in " + dir.string());
        NodeInfo node{id, {}, node_mem_total(dir)};
        for (int c : parse_cpulist(*cpulist))
            if (keep(c)) node.cpus.push_back(c);
        every_cpu.insert(every_cpu.end(), node.cpus.begin(), node.cpus.end());
        nodes.push_back(std::move(node));

        std::vector<double> row;
        std::stringstream ss(*dist);
        double v;
        while (ss >> v) row.push_back(v);
        distance.push_back(std::move(row));
    }
    for (auto& row : distance) {
        if (row.size() != nodes.size()) throw DiscoveryError("distance row length does not match node count");
    }
    // OS tables use local = 10; normalize so local = 1.0.
    for (std::size_t i = 0; i < distance.size(); ++i) {
        const double local = distance[i][i];
        if (!(local > 0)) throw DiscoveryError("non-positive local distance");
        for (auto& d : distance[i]) d = std::round(d / local * 1000.0) / 1000.0;
    }
    return Topology(std::move(nodes), std::move(distance), siblings_for(every_cpu));
}

Topology discover_or_load(const std::optional<fs::path>& fixture) {
    if (fixture) return Topology::load_fixture(*fixture);
    return discover();
}

}  // namespace numabench
