#pragma once

#include <sys/types.h>

#include <cstdint>
#include <optional>
#include <string>

namespace numabench::proc {

/// VmHWM of a process in bytes (0 = the calling process).
std::optional<std::uint64_t> peak_rss(pid_t pid = 0);
/// VmRSS in bytes.
std::optional<std::uint64_t> current_rss(pid_t pid = 0);

/// Best-effort reset of the calling process's VmHWM (Linux >= 4.0).
bool reset_peak_rss();

std::optional<std::string> numa_maps(pid_t pid = 0);

/// Sum of se.nr_migrations over every thread of the process.
std::optional<std::uint64_t> migrations(pid_t pid = 0);

/// Extracts "se.nr_migrations" from a /proc/<pid>/task/<tid>/sched dump.
std::optional<std::uint64_t> parse_sched_migrations(const std::string& sched_text);

/// Value of a "Key:   1234 kB" line from /proc/<pid>/status text, in bytes.
std::optional<std::uint64_t> parse_status_kb(const std::string& status_text, const std::string& key);

}  // namespace numabench::proc
