#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qrs/record.hpp"

namespace qrs::post {

// Candidate QRS region: a maximal run of 1s in a prediction stream.
struct QrsNode {
    int64_t start_loc = 0;
    int64_t confidence = 0; // run length in samples
    int64_t q_loc = 0;      // floor(start_loc + confidence / 2), candidate R-peak

    friend bool operator==(const QrsNode&, const QrsNode&) = default;
};

constexpr int64_t kMergeGapMax = 3;       // salt-and-pepper: merge runs <= 3 samples apart
constexpr int64_t kConfidenceMin = 6;     // moderate: drop runs shorter than 64 ms
constexpr int64_t kMinRrSamples = 20;     // advanced: 200 ms minimum R-R distance
constexpr double kSupportFactor = 0.25;   // advanced: quarter-of-max derivative threshold
constexpr int64_t kSupportContext = 50;   // derivative context half-width (1 s total)

int64_t q_loc_of(int64_t start_loc, int64_t confidence);

// One node per maximal 1-run, sorted by start_loc.
std::vector<QrsNode> group_ones(std::span<const uint8_t> bits);

// Merge consecutive nodes separated by <= kMergeGapMax zero samples; merges
// cascade left to right and the merged confidence spans the filled gap.
std::vector<QrsNode> salt_pepper(std::span<const QrsNode> nodes);

// Drop nodes with confidence below kConfidenceMin. Expects merged input.
std::vector<QrsNode> moderate(std::span<const QrsNode> nodes);

// d[i] = x[i+1] - x[i]
std::vector<double> first_derivative(std::span<const double> signal);

// Number of node samples whose |d| exceeds kSupportFactor times the maximum
// |d| inside the 1 s context window centred on the node's q_loc.
int64_t support_score(const QrsNode& node, std::span<const double> derivative,
                      int64_t context_half = kSupportContext);

// R-R filter: a node closer than kMinRrSamples to the current one survives
// only with support_score >= 1. With strict_support, every node must have
// support >= 1 regardless of spacing.
std::vector<QrsNode> advanced(std::span<const QrsNode> nodes, std::span<const double> derivative,
                              bool strict_support = false);

// Surviving candidate R-peak locations, strictly increasing.
std::vector<int64_t> localize(std::span<const QrsNode> nodes);

// Paint nodes back onto a bit stream (inverse of group_ones before merging).
std::vector<uint8_t> nodes_to_bits(std::span<const QrsNode> nodes, int64_t length);

enum class Path { Salt, Moderate, Advanced, Gru };
Path parse_path(const std::string& name);
const char* path_name(Path path);

// The rule chain for a path (Gru applies Salt only; the repair itself is the
// caller's job). `derivative` is only consulted for Path::Advanced.
std::vector<QrsNode> apply_rules(Path path, std::span<const uint8_t> bits,
                                 std::span<const double> derivative,
                                 bool strict_support = false);

} // namespace qrs::post
