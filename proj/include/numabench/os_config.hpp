#pragma once

#include <filesystem>
#include <string>

namespace numabench {

enum class ThpMode { Always, Madvise, Never, Unknown };
enum class Balancing { On, Off, Unknown };

std::string to_string(ThpMode m);
std::string to_string(Balancing b);
ThpMode parse_thp_mode(const std::string& text);
Balancing parse_balancing_mode(const std::string& text);

struct OsConfig {
    ThpMode thp = ThpMode::Unknown;
    Balancing numa_balancing = Balancing::Unknown;

    bool operator==(const OsConfig&) const = default;
};

struct OsConfigPaths {
    std::filesystem::path thp_enabled = "/sys/kernel/mm/transparent_hugepage/enabled";
    std::filesystem::path numa_balancing = "/proc/sys/kernel/numa_balancing";

    /// Same layout rooted somewhere else (used by tests).
    static OsConfigPaths under(const std::filesystem::path& root);
};

/// Selected entry of a THP control file, e.g. "always [madvise] never" -> Madvise.
ThpMode parse_thp(const std::string& file_content);
/// "0" -> Off, any other non-negative integer -> On.
Balancing parse_numa_balancing(const std::string& file_content);

/// Absent or unreadable control files yield Unknown.
OsConfig read_os_config(const OsConfigPaths& paths = {});

/// Writes every non-Unknown field and returns the re-read state. Throws
/// Error naming the file to change when the write is refused.
OsConfig set_os_config(const OsConfig& desired, const OsConfigPaths& paths = {});

}  // namespace numabench
