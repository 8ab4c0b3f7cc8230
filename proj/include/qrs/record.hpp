#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qrs {

// One signal description line from a WFDB header.
struct SignalSpec {
    std::string file_name;
    int storage_format = 212; // 212 or 16
    double adc_gain = 200.0;  // adu per mV; WFDB default when absent/zero
    int adc_zero = 0;
    std::string lead_name;
};

struct RecordHeader {
    std::string record_name;
    int n_signals = 0;
    double sampling_hz = 0.0;
    int64_t n_samples = 0;
    std::vector<SignalSpec> signals;
};

struct Annotation {
    int64_t sample_index = 0;
    char beat_code = 'N';
};

// Single-lead record on the common 100 Hz grid once resampled.
// `signal` is in mV; annotation indices are at `fs`.
struct EcgRecord {
    std::string name;
    std::vector<double> signal;
    double fs = 0.0;
    std::vector<Annotation> annotations;
    RecordHeader source;
    int64_t annotation_collisions = 0; // annotations dropped during resampling

    int64_t n_samples() const { return static_cast<int64_t>(signal.size()); }
};

using LabelStream = std::vector<uint8_t>;      // one bit per record sample
using PredictionStream = std::vector<uint8_t>; // same shape, model output

constexpr double kPipelineHz = 100.0;

} // namespace qrs
