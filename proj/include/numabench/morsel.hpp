#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <memory>
#include <optional>

namespace numabench {

struct Range {
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// Splits [0, items) into one contiguous chunk per thread and hands out
/// fixed-size morsels. A thread drains its own chunk first, then steals
/// morsels from the other chunks.
class MorselQueue {
public:
    static constexpr std::size_t kDefaultMorsel = 64 * 1024;

    MorselQueue(std::size_t items, std::size_t threads, std::size_t morsel = kDefaultMorsel)
        : threads_(std::max<std::size_t>(threads, 1)),
          morsel_(std::max<std::size_t>(morsel, 1)),
          chunks_(std::make_unique<Chunk[]>(threads_)) {
        for (std::size_t t = 0; t < threads_; ++t) {
            chunks_[t].next.store(items * t / threads_, std::memory_order_relaxed);
            chunks_[t].end = items * (t + 1) / threads_;
        }
    }

    std::optional<Range> next(std::size_t thread) {
        for (std::size_t k = 0; k < threads_; ++k) {
            Chunk& c = chunks_[(thread + k) % threads_];
            if (c.next.load(std::memory_order_relaxed) >= c.end) continue;
            const std::size_t begin = c.next.fetch_add(morsel_, std::memory_order_relaxed);
            if (begin < c.end) return Range{begin, std::min(begin + morsel_, c.end)};
        }
        return std::nullopt;
    }

private:
    struct alignas(64) Chunk {
        std::atomic<std::size_t> next{0};
        std::size_t end = 0;
    };

    std::size_t threads_;
    std::size_t morsel_;
    std::unique_ptr<Chunk[]> chunks_;
};

}  // namespace numabench
