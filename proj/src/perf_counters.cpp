#include "numabench/perf_counters.hpp"

#include <linux/perf_event.h>
#include <sys/ioctl.h>
#include <sys/syscall.h>
#include <unistd.h>

#include <cstring>

namespace numabench {

std::optional<double> CounterTotals::local_access_ratio() const {
    if (!node_loads || !node_load_misses) return std::nullopt;
    if (*node_loads == 0 || *node_load_misses > *node_loads) return std::nullopt;
    return static_cast<double>(*node_loads - *node_load_misses) / static_cast<double>(*node_loads);
}

namespace {

int open_counter(std::uint32_t type, std::uint64_t config) {
    perf_event_attr attr;
    std::memset(&attr, 0, sizeof(attr));
    attr.size = sizeof(attr);
    attr.type = type;
    attr.config = config;
    attr.disabled = 1;
    attr.exclude_kernel = 1;
    attr.exclude_hv = 1;
    const long fd = syscall(SYS_perf_event_open, &attr, 0, -1, -1, 0);
    return fd < 0 ? -1 : static_cast<int>(fd);
}

constexpr std::uint64_t node_event(std::uint64_t result) {
    return PERF_COUNT_HW_CACHE_NODE | (PERF_COUNT_HW_CACHE_OP_READ << 8) | (result << 16);
}

std::optional<std::uint64_t> read_counter(int fd) {
    if (fd < 0) return std::nullopt;
    ioctl(fd, PERF_EVENT_IOC_DISABLE, 0);
    std::uint64_t value = 0;
    if (::read(fd, &value, sizeof(value)) != static_cast<ssize_t>(sizeof(value))) return std::nullopt;
    return value;
}

void add(std::optional<std::uint64_t>& into, const std::optional<std::uint64_t>& v, bool first) {
    if (first)
        into = v;
    else if (into && v)
        *into += *v;
    else
        into.reset();
}

}  // namespace

ThreadCounters::ThreadCounters()
    : loads_fd_(open_counter(PERF_TYPE_HW_CACHE, node_event(PERF_COUNT_HW_CACHE_RESULT_ACCESS))),
      misses_fd_(open_counter(PERF_TYPE_HW_CACHE, node_event(PERF_COUNT_HW_CACHE_RESULT_MISS))),
      cache_fd_(open_counter(PERF_TYPE_HARDWARE, PERF_COUNT_HW_CACHE_MISSES)) {}

ThreadCounters::~ThreadCounters() {
    for (int fd : {loads_fd_, misses_fd_, cache_fd_})
        if (fd >= 0) close(fd);
}

void ThreadCounters::start() {
    for (int fd : {loads_fd_, misses_fd_, cache_fd_}) {
        if (fd < 0) continue;
        ioctl(fd, PERF_EVENT_IOC_RESET, 0);
        ioctl(fd, PERF_EVENT_IOC_ENABLE, 0);
    }
}

CounterTotals ThreadCounters::stop() {
    CounterTotals t;
    t.node_loads = read_counter(loads_fd_);
    t.node_load_misses = read_counter(misses_fd_);
    t.cache_misses = read_counter(cache_fd_);
    return t;
}

CounterHooks::CounterHooks(std::size_t threads) : counters_(threads) {}

void CounterHooks::start(std::size_t thread) {
    // perf fds count the thread that opened them, so open on the worker.
    counters_.at(thread) = std::make_unique<ThreadCounters>();
    counters_[thread]->start();
}

void CounterHooks::stop(std::size_t thread) {
    if (!counters_.at(thread)) return;
    const CounterTotals t = counters_[thread]->stop();
    counters_[thread].reset();
    std::lock_guard lock(mutex_);
    add(totals_.node_loads, t.node_loads, first_);
    add(totals_.node_load_misses, t.node_load_misses, first_);
    add(totals_.cache_misses, t.cache_misses, first_);
    first_ = false;
}

CounterTotals CounterHooks::totals() const {
    std::lock_guard lock(mutex_);
    return totals_;
}

}  // namespace numabench
