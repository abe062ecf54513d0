#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <utility>
#include <vector>

#include "numabench/tracking_allocator.hpp"

namespace numabench {

/// 64-bit finalizer from MurmurHash3.
inline std::uint64_t mix64(std::uint64_t k) {
    k ^= k >> 33;
    k *= 0xff51afd7ed558ccdULL;
    k ^= k >> 33;
    k *= 0xc4ceb9fe1a85ec53ULL;
    k ^= k >> 33;
    return k;
}

/// Global hash table shared by all aggregation workers. Keys are spread over
/// a power-of-two number of shards, each guarded by its own mutex.
template <typename State>
class SharedHashTable {
public:
    using Allocator = TrackingAllocator<std::pair<const std::uint64_t, State>>;
    using Map = std::unordered_map<std::uint64_t, State, std::hash<std::uint64_t>, std::equal_to<>, Allocator>;

    /// At least 4 shards per thread, never fewer than 16.
    explicit SharedHashTable(std::size_t threads, ByteLedger* ledger = nullptr)
        : shard_count_(std::bit_ceil(std::max<std::size_t>(4 * threads, 16))),
          shards_(std::make_unique<Shard[]>(shard_count_)) {
        for (std::size_t i = 0; i < shard_count_; ++i) shards_[i].map = std::make_unique<Map>(0, std::hash<std::uint64_t>{}, std::equal_to<>{}, Allocator(ledger));
    }

    /// Runs `update` on the key's state under the shard lock, creating the
    /// state with `init()` first if the key is new.
    template <typename Init, typename Update>
    void upsert(std::uint64_t key, Init&& init, Update&& update) {
        Shard& s = shard_for(key);
        std::lock_guard lock(s.mutex);
        auto it = s.map->find(key);
        if (it == s.map->end()) it = s.map->emplace(key, init()).first;
        update(it->second);
    }

    /// Copies the key's state out under the shard lock.
    bool lookup(std::uint64_t key, State& out) const {
        Shard& s = shard_for(key);
        std::lock_guard lock(s.mutex);
        auto it = s.map->find(key);
        if (it == s.map->end()) return false;
        out = it->second;
        return true;
    }

    std::size_t shard_count() const noexcept { return shard_count_; }

    /// Unsynchronized access for the finalization phase, after all writers joined.
    Map& shard(std::size_t i) { return *shards_[i].map; }
    const Map& shard(std::size_t i) const { return *shards_[i].map; }

    std::size_t size() const {
        std::size_t n = 0;
        for (std::size_t i = 0; i < shard_count_; ++i) n += shards_[i].map->size();
        return n;
    }

private:
    struct alignas(64) Shard {
        mutable std::mutex mutex;
        std::unique_ptr<Map> map;
    };

    Shard& shard_for(std::uint64_t key) const { return shards_[mix64(key) & (shard_count_ - 1)]; }

    std::size_t shard_count_;
    std::unique_ptr<Shard[]> shards_;
};

}  // namespace numabench
