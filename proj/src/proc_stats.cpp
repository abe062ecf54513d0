#include "numabench/proc_stats.hpp"

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

namespace numabench::proc {

namespace fs = std::filesystem;

namespace {

fs::path proc_dir(pid_t pid) { return pid == 0 ? fs::path("/proc/self") : fs::path("/proc") / std::to_string(pid); }

std::optional<std::string> slurp(const fs::path& p) {
    std::ifstream in(p);
    if (!in) return std::nullopt;
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::optional<std::uint64_t> parse_status_kb(const std::string& text, const std::string& key) {
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.rfind(key + ":", 0) != 0) continue;
        std::stringstream fields(line.substr(key.size() + 1));
        std::uint64_t kb = 0;
        if (fields >> kb) return kb * 1024;
    }
    return std::nullopt;
}

std::optional<std::uint64_t> peak_rss(pid_t pid) {
    auto text = slurp(proc_dir(pid) / "status");
    if (!text) return std::nullopt;
    return parse_status_kb(*text, "VmHWM");
}

std::optional<std::uint64_t> current_rss(pid_t pid) {
    auto text = slurp(proc_dir(pid) / "status");
    if (!text) return std::nullopt;
    return parse_status_kb(*text, "VmRSS");
}

bool reset_peak_rss() {
    std::ofstream out("/proc/self/clear_refs");
    if (!out) return false;
    out << "5\n";
    out.flush();
    return static_cast<bool>(out);
}

std::optional<std::string> numa_maps(pid_t pid) { return slurp(proc_dir(pid) / "numa_maps"); }

std::optional<std::uint64_t> parse_sched_migrations(const std::string& text) {
    static const std::regex re(R"(se\.nr_migrations\s*:\s*(\d+))");
    std::smatch m;
    if (std::regex_search(text, m, re)) return std::stoull(m[1]);
    return std::nullopt;
}

std::optional<std::uint64_t> migrations(pid_t pid) {
    std::error_code ec;
    const fs::path tasks = proc_dir(pid) / "task";
    std::optional<std::uint64_t> total;
    for (const auto& entry : fs::directory_iterator(tasks, ec)) {
        auto text = slurp(entry.path() / "sched");
        if (!text) continue;
        if (auto n = parse_sched_migrations(*text)) total = total.value_or(0) + *n;
    }
    return total;
}

}  // namespace numabench::proc
