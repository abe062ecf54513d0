#include "numabench/allocbench.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <memory>
#include <optional>

#include "kernel_common.hpp"
#include "numabench/proc_stats.hpp"

namespace numabench {

void MicrobenchConfig::validate() const {
    if (threads == 0) throw ConfigError("microbenchmark needs at least one thread");
    if (ops_per_thread == 0) throw ConfigError("ops_per_thread must be >= 1");
    if (live_cap == 0) throw ConfigError("live_cap must be >= 1");
    if (size_classes.empty()) throw ConfigError("size_classes must not be empty");
    for (std::size_t i = 0; i < size_classes.size(); ++i) {
        if (size_classes[i] == 0) throw ConfigError("size classes must be positive");
        if (i > 0 && size_classes[i] <= size_classes[i - 1])
            throw ConfigError("size classes must be strictly increasing");
    }
}

MicrobenchConfig MicrobenchConfig::paper_scale() {
    MicrobenchConfig c;
    c.ops_per_thread = 100'000'000;
    return c;
}

SizeClassSampler::SizeClassSampler(std::span<const std::size_t> classes) : classes_(classes.begin(), classes.end()) {
    if (classes_.empty()) throw ConfigError("size_classes must not be empty");
    double total = 0.0;
    for (auto s : classes_) total += 1.0 / static_cast<double>(s);
    double acc = 0.0;
    for (auto s : classes_) {
        pmf_.push_back((1.0 / static_cast<double>(s)) / total);
        acc += pmf_.back();
        cdf_.push_back(acc);
    }
    cdf_.back() = 1.0;
}

std::size_t SizeClassSampler::sample(Rng& rng) const {
    const double u = rng.unit();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return classes_[static_cast<std::size_t>(it - cdf_.begin())];
}

std::size_t sample_size_class(Rng& rng, std::span<const std::size_t> classes) {
    return SizeClassSampler(classes).sample(rng);
}

double compute_overhead(std::uint64_t peak_rss, std::uint64_t peak_requested) {
    if (peak_requested == 0) throw ConfigError("overhead ratio undefined: nothing was requested");
    return static_cast<double>(peak_rss) / static_cast<double>(peak_requested);
}

namespace {

constexpr std::size_t kCacheLine = 64;
constexpr std::uint64_t kPublishEvery = 4096;

struct Item {
    unsigned char* ptr;
    std::size_t size;
};

struct alignas(64) ThreadStats {
    std::atomic<std::uint64_t> published_live{0};
    std::uint64_t peak = 0;
    std::uint64_t ops = 0;
    std::uint64_t checksum = 0;
    bool failed = false;
};

}  // namespace

MicrobenchResult run_microbench(const MicrobenchConfig& config, const PlacementPlan& plan) {
    config.validate();
    const std::size_t threads = config.threads;
    detail::prepare_region(threads, plan);
    const SizeClassSampler sampler(config.size_classes);
    auto stats = std::make_unique<ThreadStats[]>(threads);
    std::atomic<std::uint64_t> sampled_peak{0};
    detail::ParallelErrors errors;
    std::chrono::steady_clock::time_point t0;
    double elapsed = 0.0;

    auto publish = [&](std::size_t tid, std::uint64_t live) {
        stats[tid].published_live.store(live, std::memory_order_relaxed);
        std::uint64_t sum = 0;
        for (std::size_t t = 0; t < threads; ++t) sum += stats[t].published_live.load(std::memory_order_relaxed);
        auto seen = sampled_peak.load(std::memory_order_relaxed);
        while (sum > seen && !sampled_peak.compare_exchange_weak(seen, sum, std::memory_order_relaxed)) {
        }
    };

    // Net of the process image, so desk-sized runs are not dominated by it.
    proc::reset_peak_rss();
    const std::uint64_t baseline_rss = proc::current_rss().value_or(0);
#pragma omp parallel num_threads(threads)
    {
        const auto tid = static_cast<std::size_t>(omp_get_thread_num());
        std::optional<AffinityGuard> pin;
        try {
            pin.emplace(plan, tid);
        } catch (...) {
            errors.capture();
        }
        Rng rng(config.seed, tid);
        std::vector<Item> live;
        live.reserve(config.live_cap);
        ThreadStats& me = stats[tid];
#pragma omp single
        {
            detail::check_team(threads, errors);
            t0 = std::chrono::steady_clock::now();
        }
        if (!errors.failed()) {
            std::uint64_t live_bytes = 0;
            std::uint64_t checksum = 0;
            for (std::uint64_t op = 0; op < config.ops_per_thread; ++op) {
                bool allocate;
                if (live.empty())
                    allocate = true;
                else if (live.size() >= config.live_cap)
                    allocate = false;
                else
                    allocate = rng.coin();

                if (allocate) {
                    const std::size_t size = sampler.sample(rng);
                    auto* p = static_cast<unsigned char*>(std::malloc(size));
                    if (!p) {
                        me.failed = true;
                        break;
                    }
                    for (std::size_t off = 0; off < size; off += kCacheLine) p[off] = static_cast<unsigned char>(op);
                    p[size - 1] = static_cast<unsigned char>(op);
                    live.push_back({p, size});
                    live_bytes += size;
                    me.peak = std::max(me.peak, live_bytes);
                } else {
                    const auto idx = static_cast<std::size_t>(rng.below(live.size()));
                    const Item item = live[idx];
                    for (std::size_t off = 0; off < item.size; off += kCacheLine) checksum += item.ptr[off];
                    checksum += item.ptr[item.size - 1];
                    std::free(item.ptr);
                    live[idx] = live.back();
                    live.pop_back();
                    live_bytes -= item.size;
                }
                me.ops = op + 1;
                if ((op + 1) % kPublishEvery == 0) publish(tid, live_bytes);
            }
            publish(tid, live_bytes);
            me.checksum = checksum;
        }
#pragma omp barrier
#pragma omp single
        elapsed = detail::seconds_since(t0);
        for (const auto& item : live) std::free(item.ptr);
    }
    errors.rethrow();

    MicrobenchResult r;
    r.elapsed = elapsed;
    for (std::size_t t = 0; t < threads; ++t) {
        r.peak_requested += stats[t].peak;
        r.ops_completed += stats[t].ops;
        r.checksum += stats[t].checksum;
        r.valid = r.valid && !stats[t].failed;
    }
    r.sampled_concurrent_peak = std::min(sampled_peak.load(), r.peak_requested);
    const std::uint64_t hwm = proc::peak_rss().value_or(0);
    r.peak_rss = hwm > baseline_rss ? hwm - baseline_rss : 0;
    if (r.peak_requested > 0) r.overhead_ratio = compute_overhead(r.peak_rss, r.peak_requested);
    return r;
}

}  // namespace numabench
