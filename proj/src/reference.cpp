// Serial reference implementations. Deliberately simple: they are the
// oracles the parallel kernels are checked against.

#include <algorithm>
#include <map>

#include "numabench/workloads.hpp"

namespace numabench::reference {

AggResult oracle_aggregate(std::span<const Record> dataset, AggKind kind) {
    AggResult result;
    if (kind == AggKind::Distributive) {
        std::map<std::uint64_t, std::uint64_t> counts;
        for (const auto& r : dataset) ++counts[r.key];
        result.groups.assign(counts.begin(), counts.end());
        return result;
    }
    std::map<std::uint64_t, std::vector<std::uint64_t>> values;
    for (const auto& r : dataset) values[r.key].push_back(r.value);
    for (auto& [key, v] : values) {
        std::sort(v.begin(), v.end());
        result.groups.emplace_back(key, v[(v.size() - 1) / 2]);
    }
    return result;
}

std::uint64_t oracle_join(std::span<const Record> build, std::span<const Record> probe) {
    std::uint64_t matches = 0;
    for (const auto& p : probe)
        for (const auto& b : build) matches += (p.key == b.key);
    return matches;
}

}  // namespace numabench::reference
