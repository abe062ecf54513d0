#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "numabench/workloads.hpp"

namespace numabench {

struct CounterTotals {
    std::optional<std::uint64_t> node_loads;        // memory loads seen by the node event
    std::optional<std::uint64_t> node_load_misses;  // the subset served by a remote node
    std::optional<std::uint64_t> cache_misses;

    /// (loads - remote) / loads, when both node events were counted.
    std::optional<double> local_access_ratio() const;
};

/// Generic perf "node" cache events plus LLC misses for the calling thread.
/// Whether the node events exist is architecture specific; every counter is
/// optional and opening never throws.
class ThreadCounters {
public:
    ThreadCounters();
    ~ThreadCounters();
    ThreadCounters(const ThreadCounters&) = delete;
    ThreadCounters& operator=(const ThreadCounters&) = delete;

    void start();
    CounterTotals stop();

private:
    int loads_fd_ = -1;
    int misses_fd_ = -1;
    int cache_fd_ = -1;
};

/// WorkerHooks that count per worker and sums across workers.
class CounterHooks final : public WorkerHooks {
public:
    explicit CounterHooks(std::size_t threads);
    void start(std::size_t thread) override;
    void stop(std::size_t thread) override;
    CounterTotals totals() const;

private:
    std::vector<std::unique_ptr<ThreadCounters>> counters_;
    mutable std::mutex mutex_;
    CounterTotals totals_;
    bool first_ = true;
};

}  // namespace numabench
