#include "numabench/os_config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>

#include "numabench/error.hpp"

namespace numabench {

std::string to_string(ThpMode m) {
    switch (m) {
    case ThpMode::Always: return "always";
    case ThpMode::Madvise: return "madvise";
    case ThpMode::Never: return "never";
    case ThpMode::Unknown: return "unknown";
    }
    return "unknown";
}

std::string to_string(Balancing b) {
    switch (b) {
    case Balancing::On: return "on";
    case Balancing::Off: return "off";
    case Balancing::Unknown: return "unknown";
    }
    return "unknown";
}

ThpMode parse_thp_mode(const std::string& text) {
    if (text == "always") return ThpMode::Always;
    if (text == "madvise") return ThpMode::Madvise;
    if (text == "never") return ThpMode::Never;
    if (text == "unknown") return ThpMode::Unknown;
    throw ConfigError("unknown THP mode '" + text + "'");
}

Balancing parse_balancing_mode(const std::string& text) {
    if (text == "on" || text == "1") return Balancing::On;
    if (text == "off" || text == "0") return Balancing::Off;
    if (text == "unknown") return Balancing::Unknown;
    throw ConfigError("unknown numa_balancing mode '" + text + "'");
}

OsConfigPaths OsConfigPaths::under(const std::filesystem::path& root) {
    return {root / "sys/kernel/mm/transparent_hugepage/enabled", root / "proc/sys/kernel/numa_balancing"};
}

ThpMode parse_thp(const std::string& content) {
    const auto open = content.find('[');
    const auto close = content.find(']', open == std::string::npos ? 0 : open);
    if (open == std::string::npos || close == std::string::npos) return ThpMode::Unknown;
    const std::string selected = content.substr(open + 1, close - open - 1);
    if (selected == "always") return ThpMode::Always;
    if (selected == "madvise") return ThpMode::Madvise;
    if (selected == "never") return ThpMode::Never;
    return ThpMode::Unknown;
}

Balancing parse_numa_balancing(const std::string& content) {
    std::stringstream ss(content);
    long v = -1;
    if (!(ss >> v) || v < 0) return Balancing::Unknown;
    return v == 0 ? Balancing::Off : Balancing::On;
}

namespace {

std::optional<std::string> slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) return std::nullopt;
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_control(const std::filesystem::path& p, const std::string& value) {
    std::ofstream out(p);
    if (out) out << value << '\n';
    out.flush();
    if (!out) {
        const int err = errno;
        throw Error("cannot write '" + value + "' to " + p.string() + " (" + std::strerror(err) +
                    "); run as root: echo " + value + " > " + p.string());
    }
}

}  // namespace

OsConfig read_os_config(const OsConfigPaths& paths) {
    OsConfig cfg;
    if (auto thp = slurp(paths.thp_enabled)) cfg.thp = parse_thp(*thp);
    if (auto nb = slurp(paths.numa_balancing)) cfg.numa_balancing = parse_numa_balancing(*nb);
    return cfg;
}

OsConfig set_os_config(const OsConfig& desired, const OsConfigPaths& paths) {
    if (desired.thp != ThpMode::Unknown) write_control(paths.thp_enabled, to_string(desired.thp));
    if (desired.numa_balancing != Balancing::Unknown)
        write_control(paths.numa_balancing, desired.numa_balancing == Balancing::On ? "1" : "0");
    return read_os_config(paths);
}

}  // namespace numabench
