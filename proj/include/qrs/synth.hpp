#pragma once

#include <cstdint>
#include <vector>

#include "qrs/record.hpp"

namespace qrs::synth {

// Knobs for the Gaussian-bump ECG generator. All randomness comes from the
// seed; identical specs produce bit-identical records.
struct SynthSpec {
    double duration_s = 60.0;
    double mean_hr_bpm = 70.0;
    double hr_jitter = 0.05;          // relative sd of the beat interval
    double qrs_amp = 1.0;             // mV
    double qrs_width_ms = 40.0;       // Gaussian sigma ~ width/4
    double p_t_amp = 0.15;            // mV, shared by P and T bumps
    double noise_sigma = 0.0;         // mV, white noise
    double baseline_wander_amp = 0.0; // mV, slow sinusoid
    double amp_jitter = 0.0;          // relative per-beat QRS amplitude spread
    uint64_t seed = 1;
};

struct SynthEcg {
    EcgRecord record;               // annotations sit at the true QRS centres
    std::vector<int64_t> truth;     // same indices, convenience copy
    std::vector<double> clean;      // bump-only component (no noise, no wander)
};

SynthEcg gen_ecg(const SynthSpec& spec);

// Stream corruptions the repair model has to undo.
struct CorruptionSpec {
    double flip_prob = 0.0;    // isolated bit flips, per sample
    double dropout_prob = 0.0; // per 1-run: punch a <=3-sample hole
    double spur_prob = 0.0;    // per sample: start a 1-5 sample spurious run
    uint64_t seed = 1;
};

std::vector<uint8_t> corrupt(const std::vector<uint8_t>& bits, const CorruptionSpec& spec);

} // namespace qrs::synth
