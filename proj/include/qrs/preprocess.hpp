#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qrs/record.hpp"

namespace qrs::pre {

constexpr int kWindowSeconds = 3;
constexpr int kOverlapSeconds = 2;

// Label region half-width around each annotation: 0.05 s per side at 100 Hz.
// The narrower reading of the labeling rule ("a region of five samples",
// half-width 2) starves the confidence-6 post-processing filter of every
// perfectly predicted beat, so the wider reading is the default and the
// width stays a parameter.
constexpr int kLabelHalfWidth = 5;

// One analysis window on the record timeline. `valid` is the count of real
// samples; positions >= valid are zero padding (short records only).
struct Segment {
    int64_t start = 0;
    std::vector<double> values;
    std::vector<uint8_t> labels;
    int valid = 0;
};

struct WindowPrediction {
    int64_t start = 0;
    std::vector<uint8_t> bits;
    int valid = 0; // 0 means "whole window"
};

// 1s at i-halfwidth..i+halfwidth around each annotation, clipped at record
// bounds.
LabelStream make_label_stream(const EcgRecord& record, int halfwidth = kLabelHalfWidth);

// Windows of window_s*fs samples at stride (window_s-overlap_s)*fs; a final
// end-anchored window covers any remainder. Records shorter than one window
// yield a single zero-padded window.
std::vector<Segment> segmentize(const EcgRecord& record, int window_s = kWindowSeconds,
                                int overlap_s = kOverlapSeconds,
                                int label_halfwidth = kLabelHalfWidth);

// (x - mean) / population std; all zeros when std < 1e-8.
std::vector<double> zscore(std::span<const double> values);
void zscore_inplace(std::vector<double>& values);

// Per-sample logical OR over every window covering the sample.
PredictionStream aggregate_or(std::span<const WindowPrediction> windows, int64_t record_len);

} // namespace qrs::pre
