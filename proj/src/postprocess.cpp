#include "qrs/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qrs/errors.hpp"

namespace qrs::post {

int64_t q_loc_of(int64_t start_loc, int64_t confidence) {
    // floor(start + 0.5 * conf) without leaving integer arithmetic
    return start_loc + confidence / 2;
}

std::vector<QrsNode> group_ones(std::span<const uint8_t> bits) {
    std::vector<QrsNode> nodes;
    const int64_t n = static_cast<int64_t>(bits.size());
    int64_t i = 0;
    while (i < n) {
        if (!bits[static_cast<size_t>(i)]) {
            ++i;
            continue;
        }
        int64_t j = i;
        while (j < n && bits[static_cast<size_t>(j)]) ++j;
        const int64_t conf = j - i;
        nodes.push_back({i, conf, q_loc_of(i, conf)});
        i = j;
    }
    return nodes;
}

std::vector<QrsNode> salt_pepper(std::span<const QrsNode> nodes) {
    for (size_t k = 1; k < nodes.size(); ++k)
        if (nodes[k].start_loc < nodes[k - 1].start_loc + nodes[k - 1].confidence)
            throw ArgumentError("salt_pepper: nodes must be sorted and non-overlapping");

    std::vector<QrsNode> out;
    for (const auto& node : nodes) {
        if (!out.empty()) {
            QrsNode& cur = out.back();
            const int64_t gap = node.start_loc - (cur.start_loc + cur.confidence);
            if (gap <= kMergeGapMax) {
                // merged node spans both runs, gap counted as filled
                cur.confidence = node.start_loc + node.confidence - cur.start_loc;
                cur.q_loc = q_loc_of(cur.start_loc, cur.confidence);
                continue;
            }
        }
        out.push_back(node);
    }
    return out;
}

std::vector<QrsNode> moderate(std::span<const QrsNode> nodes) {
    std::vector<QrsNode> out;
    out.reserve(nodes.size());
    for (const auto& node : nodes)
        if (node.confidence >= kConfidenceMin) out.push_back(node);
    return out;
}

std::vector<double> first_derivative(std::span<const double> signal) {
    std::vector<double> d;
    if (signal.size() < 2) return d;
    d.resize(signal.size() - 1);
    for (size_t i = 0; i + 1 < signal.size(); ++i) d[i] = signal[i + 1] - signal[i];
    return d;
}

int64_t support_score(const QrsNode& node, std::span<const double> derivative,
                      int64_t context_half) {
    const int64_t dn = static_cast<int64_t>(derivative.size());
    if (dn == 0) return 0;

    const int64_t lo = std::clamp<int64_t>(node.q_loc - context_half, 0, dn - 1);
    const int64_t hi = std::clamp<int64_t>(node.q_loc + context_half, 0, dn - 1);
    double max_abs = 0.0;
    for (int64_t i = lo; i <= hi; ++i)
        max_abs = std::max(max_abs, std::abs(derivative[static_cast<size_t>(i)]));
    const double threshold = kSupportFactor * max_abs;

    int64_t score = 0;
    const int64_t a = std::max<int64_t>(0, node.start_loc);
    const int64_t b = std::min<int64_t>(dn, node.start_loc + node.confidence);
    for (int64_t i = a; i < b; ++i)
        if (std::abs(derivative[static_cast<size_t>(i)]) > threshold) ++score;
    return score;
}

std::vector<QrsNode> advanced(std::span<const QrsNode> nodes, std::span<const double> derivative,
                              bool strict_support) {
    std::vector<QrsNode> out;
    for (const auto& node : nodes) {
        if (strict_support && support_score(node, derivative) < 1) continue;
        if (!out.empty() && node.q_loc - out.back().q_loc < kMinRrSamples) {
            // too close: keep the right node only when the derivative backs it
            if (!strict_support && support_score(node, derivative) < 1) continue;
        }
        out.push_back(node);
    }
    return out;
}

std::vector<int64_t> localize(std::span<const QrsNode> nodes) {
    std::vector<int64_t> peaks;
    peaks.reserve(nodes.size());
    for (const auto& node : nodes) peaks.push_back(node.q_loc);
    return peaks;
}

std::vector<uint8_t> nodes_to_bits(std::span<const QrsNode> nodes, int64_t length) {
    std::vector<uint8_t> bits(static_cast<size_t>(length), 0);
    for (const auto& node : nodes) {
        const int64_t a = std::max<int64_t>(0, node.start_loc);
        const int64_t b = std::min<int64_t>(length, node.start_loc + node.confidence);
        for (int64_t i = a; i < b; ++i) bits[static_cast<size_t>(i)] = 1;
    }
    return bits;
}

Path parse_path(const std::string& name) {
    if (name == "salt") return Path::Salt;
    if (name == "moderate") return Path::Moderate;
    if (name == "advanced") return Path::Advanced;
    if (name == "gru") return Path::Gru;
    throw ArgumentError("unknown post-processing path '" + name +
                        "' (expected salt|moderate|advanced|gru)");
}

const char* path_name(Path path) {
    switch (path) {
    case Path::Salt: return "salt";
    case Path::Moderate: return "moderate";
    case Path::Advanced: return "advanced";
    case Path::Gru: return "gru";
    }
    return "?";
}

std::vector<QrsNode> apply_rules(Path path, std::span<const uint8_t> bits,
                                 std::span<const double> derivative, bool strict_support) {
    auto nodes = salt_pepper(group_ones(bits));
    if (path == Path::Salt || path == Path::Gru) return nodes;
    nodes = moderate(nodes);
    if (path == Path::Moderate) return nodes;
    return advanced(nodes, derivative, strict_support);
}

} // namespace qrs::post
