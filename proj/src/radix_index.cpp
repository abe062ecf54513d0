#include "numabench/radix_index.hpp"

#include <algorithm>

#include "numabench/error.hpp"

namespace numabench {

struct RadixIndex::Node {
    explicit Node(bool leaf) : is_leaf(leaf) {}
    virtual ~Node() = default;
    const bool is_leaf;
};

namespace {

using Node = RadixIndex::Node;

struct Leaf final : Node {
    Leaf(std::uint64_t k, std::uint64_t v) : Node(true), key(k), value(v) {}
    std::uint64_t key;
    std::uint64_t value;
};

struct Inner final : Node {
    Inner() : Node(false) {}
    std::uint8_t prefix_len = 0;
    std::array<std::uint8_t, 8> prefix{};
    std::array<std::unique_ptr<Node>, 256> children{};
};

constexpr unsigned kKeyBytes = 8;

inline std::uint8_t byte_at(std::uint64_t key, unsigned depth) {
    return static_cast<std::uint8_t>(key >> (8 * (kKeyBytes - 1 - depth)));
}

void visit(const Node* n, const std::function<void(std::uint64_t, std::uint64_t)>& fn) {
    if (!n) return;
    if (n->is_leaf) {
        const auto* leaf = static_cast<const Leaf*>(n);
        fn(leaf->key, leaf->value);
        return;
    }
    for (const auto& child : static_cast<const Inner*>(n)->children) visit(child.get(), fn);
}

}  // namespace

RadixIndex::RadixIndex() = default;
RadixIndex::~RadixIndex() = default;
RadixIndex::RadixIndex(RadixIndex&&) noexcept = default;
RadixIndex& RadixIndex::operator=(RadixIndex&&) noexcept = default;

void RadixIndex::insert(std::uint64_t key, std::uint64_t value) {
    std::unique_ptr<Node>* ref = &root_;
    unsigned depth = 0;
    for (;;) {
        Node* n = ref->get();
        if (!n) {
            *ref = std::make_unique<Leaf>(key, value);
            ++size_;
            return;
        }
        if (n->is_leaf) {
            const auto* leaf = static_cast<const Leaf*>(n);
            if (leaf->key == key) throw ConfigError("duplicate index key " + std::to_string(key));
            auto inner = std::make_unique<Inner>();
            unsigned d = depth;
            while (byte_at(leaf->key, d) == byte_at(key, d)) {
                inner->prefix[d - depth] = byte_at(key, d);
                ++d;
            }
            inner->prefix_len = static_cast<std::uint8_t>(d - depth);
            const std::uint8_t old_byte = byte_at(leaf->key, d);
            inner->children[byte_at(key, d)] = std::make_unique<Leaf>(key, value);
            inner->children[old_byte] = std::move(*ref);
            *ref = std::move(inner);
            ++inner_nodes_;
            ++size_;
            return;
        }
        auto* inner = static_cast<Inner*>(n);
        unsigned p = 0;
        while (p < inner->prefix_len && inner->prefix[p] == byte_at(key, depth + p)) ++p;
        if (p < inner->prefix_len) {
            // Split the compressed path at the first mismatching byte.
            auto parent = std::make_unique<Inner>();
            parent->prefix_len = static_cast<std::uint8_t>(p);
            std::copy_n(inner->prefix.begin(), p, parent->prefix.begin());
            const std::uint8_t old_byte = inner->prefix[p];
            const unsigned rest = inner->prefix_len - p - 1;
            std::copy_n(inner->prefix.begin() + p + 1, rest, inner->prefix.begin());
            inner->prefix_len = static_cast<std::uint8_t>(rest);
            parent->children[byte_at(key, depth + p)] = std::make_unique<Leaf>(key, value);
            parent->children[old_byte] = std::move(*ref);
            *ref = std::move(parent);
            ++inner_nodes_;
            ++size_;
            return;
        }
        depth += inner->prefix_len;
        ref = &inner->children[byte_at(key, depth)];
        ++depth;
    }
}

std::optional<std::uint64_t> RadixIndex::lookup(std::uint64_t key) const {
    const Node* n = root_.get();
    unsigned depth = 0;
    while (n) {
        if (n->is_leaf) {
            const auto* leaf = static_cast<const Leaf*>(n);
            if (leaf->key == key) return leaf->value;
            return std::nullopt;
        }
        const auto* inner = static_cast<const Inner*>(n);
        for (unsigned p = 0; p < inner->prefix_len; ++p)
            if (inner->prefix[p] != byte_at(key, depth + p)) return std::nullopt;
        depth += inner->prefix_len;
        n = inner->children[byte_at(key, depth)].get();
        ++depth;
    }
    return std::nullopt;
}

void RadixIndex::for_each(const std::function<void(std::uint64_t, std::uint64_t)>& fn) const {
    visit(root_.get(), fn);
}

}  // namespace numabench
