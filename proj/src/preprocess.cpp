#include "qrs/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "qrs/errors.hpp"

namespace qrs::pre {

LabelStream make_label_stream(const EcgRecord& record, int halfwidth) {
    if (halfwidth < 0) throw ArgumentError("make_label_stream: negative halfwidth");
    const int64_t n = record.n_samples();
    LabelStream bits(static_cast<size_t>(n), 0);
    for (const auto& a : record.annotations) {
        const int64_t lo = std::max<int64_t>(0, a.sample_index - halfwidth);
        const int64_t hi = std::min<int64_t>(n - 1, a.sample_index + halfwidth);
        for (int64_t i = lo; i <= hi; ++i) bits[static_cast<size_t>(i)] = 1;
    }
    return bits;
}

std::vector<Segment> segmentize(const EcgRecord& record, int window_s, int overlap_s,
                                int label_halfwidth) {
    if (window_s <= 0 || overlap_s < 0 || overlap_s >= window_s)
        throw ArgumentError("segmentize: need 0 <= overlap_s < window_s");
    const int64_t n = record.n_samples();
    if (n < 1) throw ArgumentError("segmentize: empty record");

    const int64_t win = static_cast<int64_t>(std::llround(window_s * record.fs));
    const int64_t stride = static_cast<int64_t>(std::llround((window_s - overlap_s) * record.fs));
    const LabelStream labels = make_label_stream(record, label_halfwidth);

    auto cut = [&](int64_t start) {
        Segment seg;
        seg.start = start;
        seg.values.assign(static_cast<size_t>(win), 0.0);
        seg.labels.assign(static_cast<size_t>(win), 0);
        const int64_t avail = std::min<int64_t>(win, n - start);
        seg.valid = static_cast<int>(avail);
        for (int64_t i = 0; i < avail; ++i) {
            seg.values[static_cast<size_t>(i)] = record.signal[static_cast<size_t>(start + i)];
            seg.labels[static_cast<size_t>(i)] = labels[static_cast<size_t>(start + i)];
        }
        return seg;
    };

    std::vector<Segment> out;
    if (n < win) {
        out.push_back(cut(0));
        return out;
    }
    int64_t start = 0;
    for (; start + win <= n; start += stride) out.push_back(cut(start));
    const int64_t tail = n - win;
    if (tail % stride != 0) out.push_back(cut(tail)); // end-anchored remainder window
    return out;
}

std::vector<double> zscore(std::span<const double> values) {
    std::vector<double> out(values.begin(), values.end());
    zscore_inplace(out);
    return out;
}

void zscore_inplace(std::vector<double>& values) {
    const size_t n = values.size();
    if (n == 0) return;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    if (sd < 1e-8) {
        std::fill(values.begin(), values.end(), 0.0);
        return;
    }
    for (double& v : values) v = (v - mean) / sd;
}

PredictionStream aggregate_or(std::span<const WindowPrediction> windows, int64_t record_len) {
    PredictionStream out(static_cast<size_t>(record_len), 0);
    for (const auto& w : windows) {
        const int64_t len = w.valid > 0 ? w.valid : static_cast<int64_t>(w.bits.size());
        if (w.start < 0 || w.start + len > record_len)
            throw ArgumentError("aggregate_or: window [" + std::to_string(w.start) + ", " +
                                std::to_string(w.start + len) + ") outside record of length " +
                                std::to_string(record_len));
        for (int64_t i = 0; i < len; ++i)
            if (w.bits[static_cast<size_t>(i)]) out[static_cast<size_t>(w.start + i)] = 1;
    }
    return out;
}

} // namespace qrs::pre
