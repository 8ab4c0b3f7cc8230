#pragma once

// Independent reference for the rule-based post-processing chain, used as the
// oracle in exhaustive equivalence tests. Works at the bit level with
// fixpoint iteration and list surgery instead of the library's single-pass
// scans; keep it simple-minded on purpose.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace naive {

struct Node {
    int64_t start = 0;
    int64_t conf = 0;
    int64_t q = 0;

    friend bool operator==(const Node&, const Node&) = default;
};

inline std::vector<Node> runs_of(const std::vector<uint8_t>& bits) {
    std::vector<Node> nodes;
    const int64_t n = static_cast<int64_t>(bits.size());
    for (int64_t i = 0; i < n; ++i) {
        if (!bits[static_cast<size_t>(i)]) continue;
        if (i > 0 && bits[static_cast<size_t>(i - 1)]) continue;
        int64_t j = i;
        while (j < n && bits[static_cast<size_t>(j)]) ++j;
        Node node;
        node.start = i;
        node.conf = j - i;
        node.q = static_cast<int64_t>(std::floor(static_cast<double>(i) + 0.5 * static_cast<double>(node.conf)));
        nodes.push_back(node);
    }
    return nodes;
}

// Fill every interior zero-gap of length 1..3 until nothing changes.
inline std::vector<uint8_t> fill_small_gaps(std::vector<uint8_t> bits) {
    const int64_t n = static_cast<int64_t>(bits.size());
    bool changed = true;
    while (changed) {
        changed = false;
        for (int64_t i = 0; i < n; ++i) {
            if (bits[static_cast<size_t>(i)]) continue;
            int64_t j = i;
            while (j < n && !bits[static_cast<size_t>(j)]) ++j;
            const bool bounded = i > 0 && j < n;
            if (bounded && j - i <= 3) {
                for (int64_t k = i; k < j; ++k) bits[static_cast<size_t>(k)] = 1;
                changed = true;
            }
            i = j;
        }
    }
    return bits;
}

inline std::vector<Node> salt_pepper(const std::vector<uint8_t>& bits) {
    return runs_of(fill_small_gaps(bits));
}

inline std::vector<Node> moderate(const std::vector<uint8_t>& bits) {
    std::vector<Node> keep;
    for (const Node& node : salt_pepper(bits))
        if (node.conf >= 6) keep.push_back(node);
    return keep;
}

inline int64_t support(const Node& node, const std::vector<double>& deriv) {
    const int64_t dn = static_cast<int64_t>(deriv.size());
    if (dn == 0) return 0;
    double max_abs = 0;
    for (int64_t i = node.q - 50; i <= node.q + 50; ++i) {
        if (i < 0 || i >= dn) continue;
        if (std::fabs(deriv[static_cast<size_t>(i)]) > max_abs)
            max_abs = std::fabs(deriv[static_cast<size_t>(i)]);
    }
    int64_t count = 0;
    for (int64_t i = node.start; i < node.start + node.conf; ++i) {
        if (i < 0 || i >= dn) continue;
        if (std::fabs(deriv[static_cast<size_t>(i)]) > 0.25 * max_abs) ++count;
    }
    return count;
}

inline std::vector<Node> advanced(const std::vector<uint8_t>& bits,
                                  const std::vector<double>& deriv, bool strict = false) {
    std::vector<Node> nodes = moderate(bits);
    if (strict) {
        std::vector<Node> keep;
        for (const Node& node : nodes)
            if (support(node, deriv) >= 1) keep.push_back(node);
        nodes = keep;
    }
    size_t cur = 0;
    while (cur + 1 < nodes.size()) {
        if (nodes[cur + 1].q - nodes[cur].q < 20) {
            if (strict || support(nodes[cur + 1], deriv) >= 1)
                ++cur;
            else
                nodes.erase(nodes.begin() + static_cast<ptrdiff_t>(cur) + 1);
        } else {
            ++cur;
        }
    }
    return nodes;
}

} // namespace naive
