#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <new>

namespace numabench {

/// Live/peak requested-byte counters shared by every TrackingAllocator copy.
class ByteLedger {
public:
    void add(std::size_t bytes) noexcept {
        const auto now = live_.fetch_add(bytes, std::memory_order_relaxed) + bytes;
        auto peak = peak_.load(std::memory_order_relaxed);
        while (now > peak && !peak_.compare_exchange_weak(peak, now, std::memory_order_relaxed)) {
        }
    }
    void sub(std::size_t bytes) noexcept { live_.fetch_sub(bytes, std::memory_order_relaxed); }

    std::uint64_t live() const noexcept { return live_.load(std::memory_order_relaxed); }
    std::uint64_t peak() const noexcept { return peak_.load(std::memory_order_relaxed); }

private:
    alignas(64) std::atomic<std::uint64_t> live_{0};
    alignas(64) std::atomic<std::uint64_t> peak_{0};
};

/// std::allocator that reports to a ByteLedger; a null ledger disables
/// accounting (the timed path should not pay for the shared counters).
template <typename T>
class TrackingAllocator {
public:
    using value_type = T;

    TrackingAllocator() noexcept = default;
    explicit TrackingAllocator(ByteLedger* ledger) noexcept : ledger_(ledger) {}
    template <typename U>
    TrackingAllocator(const TrackingAllocator<U>& other) noexcept : ledger_(other.ledger()) {}

    T* allocate(std::size_t n) {
        T* p = std::allocator<T>{}.allocate(n);
        if (ledger_) ledger_->add(n * sizeof(T));
        return p;
    }
    void deallocate(T* p, std::size_t n) noexcept {
        if (ledger_) ledger_->sub(n * sizeof(T));
        std::allocator<T>{}.deallocate(p, n);
    }

    ByteLedger* ledger() const noexcept { return ledger_; }

    template <typename U>
    bool operator==(const TrackingAllocator<U>& o) const noexcept {
        return ledger_ == o.ledger();
    }

private:
    ByteLedger* ledger_ = nullptr;
};

}  // namespace numabench
