#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "qrs/errors.hpp"
#include "qrs/postprocess.hpp"
#include "qrs/preprocess.hpp"
#include "qrs/synth.hpp"

using namespace qrs;
using namespace qrs::synth;

TEST_CASE("gen_ecg fixed heart rate places evenly spaced peaks") {
    SynthSpec spec;
    spec.duration_s = 10;
    spec.mean_hr_bpm = 60;
    spec.hr_jitter = 0;
    spec.noise_sigma = 0;
    spec.baseline_wander_amp = 0;
    const auto ecg = gen_ecg(spec);
    REQUIRE(ecg.truth.size() == 10);
    for (size_t i = 0; i < ecg.truth.size(); ++i)
        CHECK(ecg.truth[i] == 50 + static_cast<int64_t>(i) * 100);
    CHECK(ecg.record.annotations.size() == ecg.truth.size());
    CHECK(ecg.record.n_samples() == 1000);
}

TEST_CASE("gen_ecg annotation count always equals realized beats") {
    SynthSpec spec;
    spec.duration_s = 0.5;
    spec.mean_hr_bpm = 60;
    const auto ecg = gen_ecg(spec);
    CHECK(ecg.truth.size() == ecg.record.annotations.size());
}

TEST_CASE("gen_ecg is deterministic per seed") {
    SynthSpec spec;
    spec.duration_s = 20;
    spec.noise_sigma = 0.1;
    spec.baseline_wander_amp = 0.2;
    spec.hr_jitter = 0.08;
    spec.seed = 99;
    const auto a = gen_ecg(spec);
    const auto b = gen_ecg(spec);
    CHECK(a.record.signal == b.record.signal);
    CHECK(a.truth == b.truth);

    spec.seed = 100;
    const auto c = gen_ecg(spec);
    CHECK(a.record.signal != c.record.signal);
}

TEST_CASE("gen_ecg annotations sit at local maxima of the clean component") {
    SynthSpec spec;
    spec.duration_s = 30;
    spec.hr_jitter = 0.1;
    spec.noise_sigma = 0.15;
    spec.baseline_wander_amp = 0.1;
    spec.seed = 7;
    const auto ecg = gen_ecg(spec);
    for (int64_t idx : ecg.truth) {
        const size_t i = static_cast<size_t>(idx);
        if (i == 0 || i + 1 >= ecg.clean.size()) continue;
        CHECK(ecg.clean[i] >= ecg.clean[i - 1]);
        CHECK(ecg.clean[i] >= ecg.clean[i + 1]);
    }
}

TEST_CASE("gen_ecg validates its spec") {
    SynthSpec spec;
    spec.duration_s = -1;
    CHECK_THROWS_AS(gen_ecg(spec), ArgumentError);
    spec.duration_s = 10;
    spec.mean_hr_bpm = 10;
    CHECK_THROWS_AS(gen_ecg(spec), ArgumentError);
}

TEST_CASE("corrupt identity and extremes") {
    std::vector<uint8_t> bits(500, 0);
    for (size_t i = 100; i < 105; ++i) bits[i] = 1;

    CorruptionSpec none;
    CHECK(corrupt(bits, none) == bits);

    CorruptionSpec all_flips;
    all_flips.flip_prob = 1.0;
    const auto flipped = corrupt(std::vector<uint8_t>(300, 0), all_flips);
    CHECK(flipped == std::vector<uint8_t>(300, 1));
}

TEST_CASE("corrupt preserves length and is deterministic") {
    std::vector<uint8_t> bits(1000, 0);
    for (size_t i = 0; i < bits.size(); i += 90)
        for (size_t j = i; j < std::min(bits.size(), i + 5); ++j) bits[j] = 1;
    CorruptionSpec spec;
    spec.flip_prob = 0.01;
    spec.dropout_prob = 0.5;
    spec.spur_prob = 0.01;
    spec.seed = 4;
    const auto a = corrupt(bits, spec);
    const auto b = corrupt(bits, spec);
    CHECK(a.size() == bits.size());
    CHECK(a == b);
}

TEST_CASE("spur count is binomial in the stream length") {
    const size_t n = 20000;
    CorruptionSpec spec;
    spec.spur_prob = 0.01;
    spec.seed = 12;
    const auto out = corrupt(std::vector<uint8_t>(n, 0), spec);
    // count spur starts: a 1 whose predecessor is 0
    int64_t starts = 0;
    for (size_t i = 0; i < n; ++i)
        if (out[i] && (i == 0 || !out[i - 1])) ++starts;
    const double expect = static_cast<double>(n) * spec.spur_prob;
    const double sigma = std::sqrt(expect * (1 - spec.spur_prob));
    // spur runs can fuse, so starts only undershoots; allow 3 sigma
    CHECK(static_cast<double>(starts) > expect - 3 * sigma);
    CHECK(static_cast<double>(starts) < expect + 3 * sigma);
}

TEST_CASE("labels corrupted lightly then rule-repaired recover the beats") {
    SynthSpec spec;
    spec.duration_s = 60;
    spec.hr_jitter = 0.05;
    spec.seed = 21;
    const auto ecg = gen_ecg(spec);

    EcgRecord rec = ecg.record;
    const auto labels = pre::make_label_stream(rec);

    CorruptionSpec corr;
    corr.flip_prob = 0.002;
    corr.dropout_prob = 0.3;
    corr.spur_prob = 0.002;
    corr.seed = 22;
    const auto noisy = corrupt(labels, corr);

    const auto deriv = post::first_derivative(rec.signal);
    const auto nodes = post::apply_rules(post::Path::Advanced, noisy, deriv);
    const auto peaks = post::localize(nodes);

    // count hits within +-15 samples
    size_t hit = 0;
    for (int64_t t : ecg.truth) {
        for (int64_t p : peaks)
            if (std::llabs(p - t) <= 15) {
                ++hit;
                break;
            }
    }
    const double sens = static_cast<double>(hit) / static_cast<double>(ecg.truth.size());
    const double ppv = peaks.empty() ? 0.0
                                     : static_cast<double>(hit) / static_cast<double>(peaks.size());
    CHECK(sens >= 0.99);
    CHECK(ppv >= 0.99);
}
