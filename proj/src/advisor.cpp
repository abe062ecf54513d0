#include "numabench/advisor.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "numabench/error.hpp"

namespace numabench {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Severity s) { return s == Severity::Warn ? "warn" : "info"; }

std::vector<Finding> audit(const Topology& topo, const OsConfig& os) {
    std::vector<Finding> out;
    const std::size_t nodes = topo.node_count();
    switch (os.thp) {
    case ThpMode::Always:
        out.push_back({"thp-always", Severity::Warn, "thp=always",
                       "Transparent hugepages on by default slowed most workloads; disabling THP is generally "
                       "worthwhile."});
        break;
    case ThpMode::Unknown:
        out.push_back({"thp-unknown", Severity::Info, "thp=unknown",
                       "THP control file not readable; THP advice is skipped."});
        break;
    default: break;
    }
    if (nodes >= 2) {
        if (os.numa_balancing == Balancing::On)
            out.push_back({"numa-balancing-on", Severity::Warn, "numa_balancing=1",
                           "AutoNUMA's page and thread migrations cost more than the locality they recover."});
        else if (os.numa_balancing == Balancing::Unknown)
            out.push_back({"numa-balancing-unknown", Severity::Info, "numa_balancing=unknown",
                           "NUMA balancing state not readable; balancing advice is skipped."});
        out.push_back({"multi-node", Severity::Info, std::to_string(nodes) + " nodes",
                       "Memory placement and thread affinity matter on multi-node hosts."});
    } else {
        out.push_back({"uma-host", Severity::Info, "1 node",
                       "Single memory node; NUMA placement advice does not apply."});
    }
    return out;
}

Ranking rank_allocators(std::span<const CalibrationSample> samples, double overhead_cap) {
    Ranking r;
    for (const auto& s : samples) {
        if (s.error) {
            r.findings.push_back({"allocator-failed:" + s.allocator.id, Severity::Info, *s.error,
                                  "Calibration run failed; allocator excluded from the ranking."});
            continue;
        }
        if (s.overhead_ratio > overhead_cap) {
            std::ostringstream obs;
            obs << "overhead " << std::setprecision(3) << s.overhead_ratio << " > cap " << overhead_cap;
            r.findings.push_back({"allocator-excluded:" + s.allocator.id, Severity::Info, obs.str(),
                                  "Memory overhead above the budget; allocator excluded from the ranking."});
            continue;
        }
        r.ranked.push_back({s.allocator, s.elapsed, s.overhead_ratio});
    }
    std::sort(r.ranked.begin(), r.ranked.end(), [](const RankedAllocator& a, const RankedAllocator& b) {
        if (a.elapsed != b.elapsed) return a.elapsed < b.elapsed;
        return a.allocator.id < b.allocator.id;
    });
    return r;
}

Ranking calibrate(std::span<const AllocatorSpec> allocators, const MicrobenchConfig& config,
                  const RunnerOptions& runner, std::size_t repetitions, double overhead_cap) {
    std::vector<CalibrationSample> samples;
    for (const auto& a : allocators) {
        CalibrationSample s{a, 0.0, 0.0, std::nullopt};
        try {
            ExperimentConfig c;
            c.workload = Workload::Microbench;
            c.microbench = config;
            c.threads = config.threads;
            c.seed = config.seed;
            c.allocator = a;
            c.repetitions = repetitions;
            c.placement = Strategy::Sparse;
            const RunResult r = execute_run(c, runner);
            s.elapsed = r.summary.mean;
            double overhead = 0.0;
            for (std::size_t i = 1; i < r.reps.size(); ++i) {
                const auto& d = r.reps[i].detail;
                if (!d.value("valid", false)) throw RunError("allocation failed during calibration");
                overhead += d.at("overhead_ratio").get<double>();
            }
            s.overhead_ratio = overhead / static_cast<double>(r.reps.size() - 1);
        } catch (const std::exception& e) {
            s.error = e.what();
        }
        samples.push_back(std::move(s));
    }
    return rank_allocators(samples, overhead_cap);
}

WorkloadHint parse_hint(const std::string& text) {
    if (text == "heavy" || text == "allocation-heavy") return WorkloadHint::AllocationHeavy;
    if (text == "light" || text == "allocation-light") return WorkloadHint::AllocationLight;
    throw ConfigError("unknown workload hint '" + text + "' (expected heavy or light)");
}

std::vector<Recommendation> recommend(std::span<const Finding> findings, const Ranking& ranking,
                                      const RecommendOptions& options) {
    auto has = [&](const std::string& id) {
        return std::any_of(findings.begin(), findings.end(), [&](const Finding& f) { return f.id == id; });
    };
    std::vector<Recommendation> out;
    if (has("thp-always"))
        out.push_back({"disable-thp", Severity::Warn, "set transparent hugepages to never", "thp-always",
                       std::nullopt, std::nullopt});
    if (has("numa-balancing-on")) {
        Recommendation r{"disable-numa-balancing", Severity::Warn, "set kernel.numa_balancing to 0",
                         "numa-balancing-on", std::nullopt, std::nullopt};
        if (!options.privileged) r.mitigation = "without root, run under the Interleave memory policy";
        out.push_back(std::move(r));
    }
    if (has("multi-node")) {
        out.push_back({"use-interleave", Severity::Info, "run with the Interleave memory policy", "multi-node",
                       std::nullopt, std::nullopt});
        out.push_back({"pin-sparse", Severity::Info, "pin threads with the Sparse strategy", "multi-node",
                       std::nullopt, std::nullopt});
    }
    if (!ranking.ranked.empty()) {
        const auto& winner = ranking.ranked.front();
        if (winner.allocator.id != options.current_allocator && !winner.allocator.is_default()) {
            Recommendation r{"use-allocator",
                             options.hint == WorkloadHint::AllocationLight ? Severity::Info : Severity::Warn,
                             "preload " + winner.allocator.id, "ranking:" + winner.allocator.id, std::nullopt,
                             winner.allocator};
            if (options.hint == WorkloadHint::AllocationLight)
                r.mitigation = "workload is comparatively light on memory allocation; gain is likely small";
            out.push_back(std::move(r));
        }
    }
    return out;
}

std::string emit_prefix(std::span<const Recommendation> recs, const OsConfigPaths& paths) {
    if (recs.empty()) return "# no changes recommended\n";
    std::string env, flags;
    std::vector<std::string> root;
    bool interleave = false;
    for (const auto& r : recs) {
        if (r.id == "use-allocator" && r.allocator) env = "LD_PRELOAD=" + r.allocator->path + " ";
        if (r.id == "use-interleave" || (r.id == "disable-numa-balancing" && r.mitigation)) interleave = true;
        if (r.id == "pin-sparse") flags += " --placement sparse";
        if (r.id == "disable-thp") root.push_back("echo never > " + paths.thp_enabled.string());
        if (r.id == "disable-numa-balancing") root.push_back("echo 0 > " + paths.numa_balancing.string());
    }
    if (interleave) flags = " --mempolicy interleave" + flags;
    std::string out;
    if (!env.empty() || !flags.empty()) out += "# launch prefix\n" + env + "numabench run" + flags + "\n";
    if (!root.empty()) {
        out += "# privileged commands (root)\n";
        for (const auto& c : root) out += c + "\n";
    }
    if (out.empty()) out = "# no changes recommended\n";
    return out;
}

std::string report_text(const AdvisorReport& report) {
    std::ostringstream out;
    out << "Findings\n";
    auto finding_line = [&](const Finding& f) {
        out << "  [" << to_string(f.severity) << "] " << f.id << " (" << f.observed << "): " << f.rationale << '\n';
    };
    for (const auto& f : report.findings) finding_line(f);
    for (const auto& f : report.ranking.findings) finding_line(f);
    out << "\nAllocator ranking\n";
    if (report.ranking.ranked.empty()) out << "  (none)\n";
    for (std::size_t i = 0; i < report.ranking.ranked.size(); ++i) {
        const auto& r = report.ranking.ranked[i];
        out << "  " << i + 1 << ". " << std::left << std::setw(14) << r.allocator.id << std::right << std::fixed
            << std::setprecision(4) << r.elapsed << " s  overhead " << std::setprecision(2) << r.overhead_ratio
            << '\n';
        out.unsetf(std::ios::fixed);
    }
    out << "\nRecommendations\n";
    if (report.recommendations.empty()) out << "  (none)\n";
    for (const auto& r : report.recommendations) {
        out << "  [" << to_string(r.severity) << "] " << r.id << ": " << r.action << " (cites " << r.cites << ")\n";
        if (r.mitigation) out << "      " << *r.mitigation << '\n';
    }
    out << '\n' << report.prefix;
    return out.str();
}

json report_json(const AdvisorReport& report) {
    auto finding = [](const Finding& f) {
        return json{{"id", f.id}, {"severity", to_string(f.severity)}, {"observed", f.observed},
                    {"rationale", f.rationale}};
    };
    json findings = json::array();
    for (const auto& f : report.findings) findings.push_back(finding(f));
    json excluded = json::array();
    for (const auto& f : report.ranking.findings) excluded.push_back(finding(f));
    json ranking = json::array();
    for (const auto& r : report.ranking.ranked)
        ranking.push_back({{"id", r.allocator.id}, {"path", r.allocator.path}, {"elapsed", r.elapsed},
                           {"overhead_ratio", r.overhead_ratio}});
    json recs = json::array();
    for (const auto& r : report.recommendations) {
        json j{{"id", r.id}, {"severity", to_string(r.severity)}, {"action", r.action}, {"cites", r.cites}};
        if (r.mitigation) j["mitigation"] = *r.mitigation;
        if (r.allocator) j["allocator"] = {{"id", r.allocator->id}, {"path", r.allocator->path}};
        recs.push_back(std::move(j));
    }
    return {{"findings", findings},
            {"excluded", excluded},
            {"ranking", ranking},
            {"recommendations", recs},
            {"prefix", report.prefix}};
}

namespace {

const char* const kWellKnown[] = {
    "/usr/lib/x86_64-linux-gnu/libjemalloc.so.2",
    "/usr/lib/x86_64-linux-gnu/libtcmalloc_minimal.so.4",
    "/usr/lib/x86_64-linux-gnu/libtcmalloc.so.4",
    "/usr/lib/x86_64-linux-gnu/libtbbmalloc.so.2",
    "/usr/lib/x86_64-linux-gnu/libmimalloc.so.2",
    "/usr/lib/aarch64-linux-gnu/libjemalloc.so.2",
    "/usr/lib/aarch64-linux-gnu/libtcmalloc_minimal.so.4",
    "/usr/lib/aarch64-linux-gnu/libtbbmalloc.so.2",
    "/usr/lib/aarch64-linux-gnu/libmimalloc.so.2",
    "/usr/lib64/libjemalloc.so.2",
    "/usr/lib64/libtcmalloc_minimal.so.4",
    "/usr/lib64/libtbbmalloc.so.2",
    "/usr/lib64/libmimalloc.so.2",
    "/usr/local/lib/libjemalloc.so.2",
    "/usr/local/lib/libmimalloc.so",
    "/usr/local/lib/libhoard.so",
};

std::string id_from_path(const std::string& path) {
    std::string name = fs::path(path).filename().string();
    if (name.rfind("lib", 0) == 0) name = name.substr(3);
    return name.substr(0, name.find('.'));
}

}  // namespace

std::vector<AllocatorSpec> discover_allocators(const std::optional<fs::path>& config) {
    std::vector<AllocatorSpec> out{AllocatorSpec{}};
    std::set<std::string> ids{"system"};
    auto add = [&](AllocatorSpec a) {
        if (a.is_default() || ids.contains(a.id)) return;
        ids.insert(a.id);
        out.push_back(std::move(a));
    };
    if (config) {
        std::ifstream in(*config);
        if (!in) throw ConfigError("cannot read allocator list " + config->string());
        try {
            json j = json::parse(in);
            if (j.is_object()) j = j.at("allocators");
            if (!j.is_array()) throw ConfigError("allocator list must be a JSON array");
            for (const auto& e : j) {
                if (e.is_string())
                    add({id_from_path(e.get<std::string>()), e.get<std::string>()});
                else
                    add({e.at("id").get<std::string>(), e.at("path").get<std::string>()});
            }
        } catch (const json::exception& e) {
            throw ConfigError(config->string() + ": " + e.what());
        }
    }
    for (const char* p : kWellKnown) {
        std::error_code ec;
        if (fs::exists(p, ec)) add({id_from_path(p), p});
    }
    return out;
}

}  // namespace numabench
