#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "numabench/placement.hpp"
#include "numabench/rng.hpp"

namespace numabench {

struct MicrobenchConfig {
    std::size_t threads = 1;
    std::uint64_t ops_per_thread = 1'000'000;
    std::vector<std::size_t> size_classes{16, 64, 256, 1024, 4096, 16384, 65536};
    std::size_t live_cap = 4096;  // live allocations per thread
    std::uint64_t seed = 42;

    void validate() const;
    static MicrobenchConfig paper_scale();

    bool operator==(const MicrobenchConfig&) const = default;
};

struct MicrobenchResult {
    double elapsed = 0.0;               // seconds
    std::uint64_t peak_rss = 0;         // bytes, resident high-water mark above the pre-run baseline
    /// Sum over threads of each thread's maximum live requested bytes. Every
    /// term is a pure function of (seed, thread), so the total is replayable.
    std::uint64_t peak_requested = 0;
    /// Highest sum of live bytes seen by the periodic cross-thread sampling;
    /// timing dependent, never above peak_requested.
    std::uint64_t sampled_concurrent_peak = 0;
    std::uint64_t ops_completed = 0;
    double overhead_ratio = 0.0;        // peak_rss / peak_requested
    bool valid = true;                  // false when an allocation failed
    std::uint64_t checksum = 0;         // folds every byte read; defeats dead-code elimination
};

/// Picks class s with probability (1/s) / sum_j(1/s_j).
class SizeClassSampler {
public:
    explicit SizeClassSampler(std::span<const std::size_t> classes);
    std::size_t sample(Rng& rng) const;
    /// Analytic probability of each class, in class order.
    const std::vector<double>& probabilities() const noexcept { return pmf_; }

private:
    std::vector<std::size_t> classes_;
    std::vector<double> pmf_;
    std::vector<double> cdf_;
};

std::size_t sample_size_class(Rng& rng, std::span<const std::size_t> classes);

/// Each thread runs ops_per_thread operations on its own live pool:
///   pool empty              -> allocate
///   pool full (== live_cap) -> free
///   otherwise               -> fair coin: allocate or free
/// Allocate draws a size class, mallocs and writes every cache line; free
/// picks a uniform live item, reads every cache line and frees it. Thread t
/// draws from Rng(seed, t) in exactly that order (coin, then size or index).
MicrobenchResult run_microbench(const MicrobenchConfig& config, const PlacementPlan& plan = {});

/// peak_rss / peak_requested; throws ConfigError when peak_requested == 0.
double compute_overhead(std::uint64_t peak_rss, std::uint64_t peak_requested);

}  // namespace numabench
