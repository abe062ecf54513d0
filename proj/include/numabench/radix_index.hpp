#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>

namespace numabench {

/// Byte-wise radix trie over the big-endian bytes of a 64-bit key.
///
/// Inner nodes are 256-way and carry a compressed path prefix, so chains of
/// single-child nodes never materialize; a leaf is created as soon as a key
/// is the only one below a byte position (lazy expansion). Built by one
/// thread, then read concurrently without synchronization.
class RadixIndex {
public:
    RadixIndex();
    ~RadixIndex();
    RadixIndex(RadixIndex&&) noexcept;
    RadixIndex& operator=(RadixIndex&&) noexcept;

    /// Throws ConfigError if the key is already present.
    void insert(std::uint64_t key, std::uint64_t value);
    std::optional<std::uint64_t> lookup(std::uint64_t key) const;
    bool contains(std::uint64_t key) const { return lookup(key).has_value(); }

    std::size_t size() const noexcept { return size_; }
    /// Number of inner nodes; exposed so tests can observe path compression.
    std::size_t inner_nodes() const noexcept { return inner_nodes_; }

    /// Visits every entry in ascending key order.
    void for_each(const std::function<void(std::uint64_t key, std::uint64_t value)>& fn) const;

    struct Node;

private:
    std::unique_ptr<Node> root_;
    std::size_t size_ = 0;
    std::size_t inner_nodes_ = 0;
};

}  // namespace numabench
