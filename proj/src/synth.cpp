#include "qrs/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "qrs/errors.hpp"

namespace qrs::synth {

namespace {

constexpr double kPi = 3.14159265358979323846;

void add_bump(std::vector<double>& x, double center_s, double amp, double sigma_s, double fs) {
    // truncate at 4 sigma, contribution below 3e-4 of the peak
    const int64_t lo = std::max<int64_t>(0, std::llround((center_s - 4 * sigma_s) * fs));
    const int64_t hi =
        std::min<int64_t>(static_cast<int64_t>(x.size()) - 1, std::llround((center_s + 4 * sigma_s) * fs));
    for (int64_t i = lo; i <= hi; ++i) {
        const double dt = static_cast<double>(i) / fs - center_s;
        x[static_cast<size_t>(i)] += amp * std::exp(-dt * dt / (2 * sigma_s * sigma_s));
    }
}

} // namespace

SynthEcg gen_ecg(const SynthSpec& spec) {
    if (spec.duration_s <= 0) throw ArgumentError("gen_ecg: duration must be positive");
    if (spec.mean_hr_bpm < 30 || spec.mean_hr_bpm > 220)
        throw ArgumentError("gen_ecg: mean heart rate out of range [30, 220] bpm");
    if (spec.qrs_width_ms <= 0) throw ArgumentError("gen_ecg: QRS width must be positive");

    const double fs = kPipelineHz;
    const int64_t n = std::llround(spec.duration_s * fs);
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> unit_normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // beat times: mean interval with relative jitter, first beat at half an interval
    const double mean_rr = 60.0 / spec.mean_hr_bpm;
    std::vector<double> beat_times;
    double t = mean_rr / 2;
    while (t < spec.duration_s) {
        beat_times.push_back(t);
        double rr = mean_rr * (1.0 + spec.hr_jitter * unit_normal(rng));
        rr = std::max(rr, 0.25); // keep >= 240 bpm apart even under heavy jitter
        t += rr;
    }

    SynthEcg out;
    out.clean.assign(static_cast<size_t>(n), 0.0);

    const double qrs_sigma = spec.qrs_width_ms / 1000.0 / 4.0;
    for (double bt : beat_times) {
        // snap the bump centre onto the sample grid so the annotation sample
        // is exactly the local maximum
        const int64_t idx = std::clamp<int64_t>(std::llround(bt * fs), 0, n - 1);
        const double center = static_cast<double>(idx) / fs;
        const double amp = spec.qrs_amp * (1.0 + spec.amp_jitter * unit_normal(rng));
        add_bump(out.clean, center, amp, qrs_sigma, fs);
        add_bump(out.clean, center - 0.16, spec.p_t_amp, 0.025, fs); // P
        add_bump(out.clean, center + 0.24, spec.p_t_amp * 1.4, 0.05, fs); // T
        out.truth.push_back(idx);
        out.record.annotations.push_back({idx, 'N'});
    }

    out.record.name = "synth";
    out.record.fs = fs;
    out.record.signal = out.clean;
    if (spec.baseline_wander_amp != 0.0) {
        const double phase = unit(rng) * 2 * kPi;
        for (int64_t i = 0; i < n; ++i)
            out.record.signal[static_cast<size_t>(i)] +=
                spec.baseline_wander_amp * std::sin(2 * kPi * 0.33 * static_cast<double>(i) / fs + phase);
    }
    if (spec.noise_sigma != 0.0) {
        for (int64_t i = 0; i < n; ++i)
            out.record.signal[static_cast<size_t>(i)] += spec.noise_sigma * unit_normal(rng);
    }

    out.record.source.record_name = out.record.name;
    out.record.source.n_signals = 1;
    out.record.source.sampling_hz = fs;
    out.record.source.n_samples = n;
    return out;
}

std::vector<uint8_t> corrupt(const std::vector<uint8_t>& bits, const CorruptionSpec& spec) {
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> hole_len(1, 3);
    std::uniform_int_distribution<int> spur_len(1, 5);

    std::vector<uint8_t> out = bits;
    const int64_t n = static_cast<int64_t>(out.size());

    if (spec.flip_prob > 0)
        for (int64_t i = 0; i < n; ++i)
            if (unit(rng) < spec.flip_prob) out[static_cast<size_t>(i)] ^= 1;

    if (spec.dropout_prob > 0) {
        int64_t i = 0;
        while (i < n) {
            if (!out[static_cast<size_t>(i)]) {
                ++i;
                continue;
            }
            int64_t j = i;
            while (j < n && out[static_cast<size_t>(j)]) ++j;
            const int64_t run = j - i;
            if (run >= 3 && unit(rng) < spec.dropout_prob) {
                const int len = std::min<int64_t>(hole_len(rng), run - 2);
                std::uniform_int_distribution<int64_t> pos(i + 1, j - len - 1);
                const int64_t at = pos(rng);
                for (int64_t k = 0; k < len; ++k) out[static_cast<size_t>(at + k)] = 0;
            }
            i = j;
        }
    }

    if (spec.spur_prob > 0)
        for (int64_t i = 0; i < n; ++i)
            if (unit(rng) < spec.spur_prob) {
                const int len = spur_len(rng);
                for (int64_t k = i; k < std::min(n, i + len); ++k) out[static_cast<size_t>(k)] = 1;
            }

    return out;
}

} // namespace qrs::synth
