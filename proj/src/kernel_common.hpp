#pragma once

#include <omp.h>

#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>

#include "numabench/error.hpp"
#include "numabench/placement.hpp"

namespace numabench::detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// First exception thrown by any worker of a parallel region. Exceptions
/// must not escape an OpenMP region, so workers capture and keep going
/// through the barriers.
class ParallelErrors {
public:
    void capture() {
        std::lock_guard lock(mutex_);
        if (!first_) first_ = std::current_exception();
        failed_.store(true, std::memory_order_relaxed);
    }
    bool failed() const { return failed_.load(std::memory_order_relaxed); }
    void rethrow() const {
        if (first_) std::rethrow_exception(first_);
    }

private:
    std::mutex mutex_;
    std::exception_ptr first_;
    std::atomic<bool> failed_{false};
};

inline void prepare_region(std::size_t threads, const PlacementPlan& plan) {
    if (threads == 0) throw ConfigError("thread count must be >= 1");
    if (plan.strategy != Strategy::None && plan.assignment.size() != threads)
        throw ConfigError("placement plan covers " + std::to_string(plan.assignment.size()) + " threads, kernel runs " +
                          std::to_string(threads));
    omp_set_dynamic(0);
}

/// Called once inside the region; the team must be exactly the requested size.
inline void check_team(std::size_t threads, ParallelErrors& errors) {
    if (static_cast<std::size_t>(omp_get_num_threads()) != threads) {
        try {
            throw Error("OpenMP granted " + std::to_string(omp_get_num_threads()) + " threads, requested " +
                        std::to_string(threads));
        } catch (...) {
            errors.capture();
        }
    }
}

}  // namespace numabench::detail
