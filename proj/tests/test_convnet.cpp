#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "qrs/convnet.hpp"
#include "qrs/errors.hpp"
#include "qrs/synth.hpp"

using namespace qrs;
using namespace qrs::nn;

namespace {

SegmentBatch random_batch(int n, int len, uint64_t seed, double label_rate = 0.3) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> x_dist(0, 1);
    std::bernoulli_distribution y_dist(label_rate);
    SegmentBatch batch;
    batch.n = n;
    batch.len = len;
    batch.x.resize(static_cast<size_t>(n) * len);
    batch.y.resize(batch.x.size());
    batch.mask.assign(batch.x.size(), 1);
    for (auto& v : batch.x) v = x_dist(rng);
    for (auto& v : batch.y) v = y_dist(rng) ? 1 : 0;
    return batch;
}

ModelParams zeroed_params(const ConvNetConfig& cfg) {
    auto params = init_params(cfg, 1);
    std::fill(params.theta.data.begin(), params.theta.data.end(), 0.0);
    for (int l = 0; l < cfg.depth; ++l) {
        auto g = params.theta.view("bn" + std::to_string(l) + ".gamma");
        std::fill(g.begin(), g.end(), 1.0);
    }
    return params;
}

} // namespace

TEST_CASE("zero network outputs one half everywhere") {
    ConvNetConfig cfg;
    auto params = zeroed_params(cfg);
    std::vector<double> segment(300, 0.7);
    const auto probs = forward(params, cfg, segment, Mode::Infer);
    REQUIRE(probs.size() == 300);
    for (double p : probs) CHECK(p == doctest::Approx(0.5));
}

TEST_CASE("scoring bias saturation") {
    ConvNetConfig cfg;
    auto params = zeroed_params(cfg);
    params.theta.view("score.b")[0] = 10.0;
    std::vector<double> segment(300, 0.0);
    const auto probs = forward(params, cfg, segment, Mode::Infer);
    for (double p : probs) CHECK(p == doctest::Approx(1.0 / (1.0 + std::exp(-10.0))));
}

TEST_CASE("output length equals input length for every depth") {
    for (int depth : {2, 4, 8, 16, 32, 64}) {
        ConvNetConfig cfg;
        cfg.depth = depth;
        auto params = init_params(cfg, 3);
        const auto batch = random_batch(1, 300, 17);
        const auto probs = forward_batch(params, cfg, batch, Mode::Infer);
        CHECK(probs.size() == 300);
    }
}

TEST_CASE("config validation") {
    ConvNetConfig cfg;
    cfg.depth = 1;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    cfg.depth = 2;
    cfg.kernel = 4;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
}

TEST_CASE("shape mismatch is rejected") {
    ConvNetConfig cfg;
    auto params = init_params(cfg, 3);
    ConvNetConfig deeper;
    deeper.depth = 4;
    const auto batch = random_batch(2, 300, 18);
    CHECK_THROWS_AS(forward_batch(params, deeper, batch, Mode::Infer), ArgumentError);
}

TEST_CASE("bce_loss worked values") {
    std::vector<double> perfect = {1.0, 0.0, 1.0};
    std::vector<uint8_t> labels = {1, 0, 1};
    std::vector<uint8_t> mask = {1, 1, 1};
    CHECK(bce_loss(perfect, labels, mask) < 1e-5);

    std::vector<double> half(4, 0.5);
    std::vector<uint8_t> y = {0, 1, 0, 1};
    std::vector<uint8_t> m(4, 1);
    CHECK(bce_loss(half, y, m) == doctest::Approx(std::log(2.0)).epsilon(1e-6));

    std::vector<uint8_t> none(4, 0);
    CHECK(bce_loss(half, y, none) == 0.0);
}

TEST_CASE("predict_binary strict threshold") {
    const std::vector<double> p = {0.4, 0.5, 0.6};
    CHECK(predict_binary(p, 0.5) == std::vector<uint8_t>{0, 0, 1});
    CHECK(predict_binary(std::vector<double>(3, 0.5), 0.5) == std::vector<uint8_t>(3, 0));
    CHECK(predict_binary(p, 0.0) == std::vector<uint8_t>{1, 1, 1});
}

TEST_CASE("scoring-bias gradient of the zero network is one half") {
    // zero weights, zero labels: p = 0.5, d(bce)/d(score.b) = mean(p - y) = 0.5
    ConvNetConfig cfg;
    auto params = zeroed_params(cfg);
    SegmentBatch batch;
    batch.n = 2;
    batch.len = 300;
    batch.x.assign(600, 0.0);
    batch.y.assign(600, 0);
    batch.mask.assign(600, 1);
    const auto grads = backward(params, cfg, batch);
    const auto& entry = params.theta.entry("score.b");
    CHECK(grads[entry.offset] == doctest::Approx(0.5));
}

TEST_CASE("duplicated batch gives the same gradient as the single batch") {
    ConvNetConfig cfg;
    auto params = init_params(cfg, 5);
    const auto one = random_batch(3, 120, 19);
    SegmentBatch two = one;
    two.n = 6;
    two.x.insert(two.x.end(), one.x.begin(), one.x.end());
    two.y.insert(two.y.end(), one.y.begin(), one.y.end());
    two.mask.insert(two.mask.end(), one.mask.begin(), one.mask.end());

    const auto g1 = backward(params, cfg, one);
    const auto g2 = backward(params, cfg, two);
    for (size_t i = 0; i < g1.size(); ++i) CHECK(g2[i] == doctest::Approx(g1[i]).epsilon(1e-9));
}

TEST_CASE("gradients match central finite differences") {
    for (int depth : {2, 4}) {
        ConvNetConfig cfg;
        cfg.depth = depth;
        auto params = init_params(cfg, 23 + static_cast<uint64_t>(depth));
        auto batch = random_batch(4, 60, 29 + static_cast<uint64_t>(depth));

        double loss = 0;
        const auto grads = backward(params, cfg, batch, &loss);

        std::mt19937_64 pick(31);
        std::uniform_int_distribution<size_t> idx_dist(0, params.theta.data.size() - 1);
        const double h = 1e-4;
        for (int trial = 0; trial < 60; ++trial) {
            const size_t i = idx_dist(pick);
            const double keep = params.theta.data[i];
            params.theta.data[i] = keep + h;
            const auto up = forward_batch(params, cfg, batch, Mode::Train);
            const double lu = bce_loss(up, batch.y, batch.mask);
            params.theta.data[i] = keep - h;
            const auto dn = forward_batch(params, cfg, batch, Mode::Train);
            const double ld = bce_loss(dn, batch.y, batch.mask);
            params.theta.data[i] = keep;
            const double fd = (lu - ld) / (2 * h);
            CHECK(std::abs(grads[i] - fd) / std::max(1.0, std::abs(grads[i])) < 1e-3);
        }
    }
}

TEST_CASE("infer-mode forward is pure") {
    ConvNetConfig cfg;
    auto params = init_params(cfg, 37);
    const auto batch = random_batch(2, 300, 41);
    const auto a = forward_batch(params, cfg, batch, Mode::Infer);
    const auto b = forward_batch(params, cfg, batch, Mode::Infer);
    CHECK(a == b);
}

TEST_CASE("circular padding makes the frozen network shift-covariant") {
    ConvNetConfig cfg;
    cfg.padding = PadMode::Circular;
    auto params = init_params(cfg, 43);
    // arbitrary positive running variances, nonzero means
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> var_dist(0.5, 2.0);
    std::uniform_real_distribution<double> mean_dist(-0.3, 0.3);
    for (auto& s : params.bn) {
        for (auto& v : s.var) v = var_dist(rng);
        for (auto& m : s.mean) m = mean_dist(rng);
    }

    auto batch = random_batch(1, 300, 45);
    const int shift = 37;
    SegmentBatch shifted = batch;
    for (int t = 0; t < 300; ++t)
        shifted.x[static_cast<size_t>((t + shift) % 300)] = batch.x[static_cast<size_t>(t)];

    const auto base = forward_raw(params, cfg, batch, Mode::Infer);
    const auto moved = forward_raw(params, cfg, shifted, Mode::Infer);
    for (int t = 0; t < 300; ++t)
        CHECK(moved[static_cast<size_t>((t + shift) % 300)] ==
              doctest::Approx(base[static_cast<size_t>(t)]).epsilon(1e-6));
}

TEST_CASE("training bookkeeping on a small synthetic corpus") {
    std::vector<SubjectSegments> dataset;
    for (int s = 0; s < 10; ++s) {
        synth::SynthSpec spec;
        spec.duration_s = 12;
        spec.noise_sigma = 0.05;
        spec.seed = 100 + static_cast<uint64_t>(s);
        auto ecg = synth::gen_ecg(spec);
        ecg.record.name = "subj" + std::to_string(s);
        dataset.push_back(record_to_subject(ecg.record));
    }

    TrainConfig tc;
    tc.max_epochs = 1;
    tc.batch_size = 16;
    tc.seed = 5;
    ConvNetConfig nc;

    const auto models = train(dataset, tc, nc);
    REQUIRE(models.size() == 5);
    std::vector<std::string> seen;
    for (const auto& m : models) {
        CHECK(m.history.epochs.size() == 1); // max_epochs=1: one row, no scheduler
        CHECK(m.history.epochs[0].lr == doctest::Approx(tc.lr0));
        CHECK(m.val_subjects.size() == 2);
        for (const auto& s : m.val_subjects) seen.push_back(s);
    }
    std::sort(seen.begin(), seen.end());
    CHECK(std::unique(seen.begin(), seen.end()) == seen.end()); // disjoint folds
    CHECK(seen.size() == 10);

    // same seed reruns bit-identically
    const auto again = train(dataset, tc, nc);
    for (size_t m = 0; m < models.size(); ++m) {
        CHECK(models[m].val_subjects == again[m].val_subjects);
        CHECK(models[m].history.epochs[0].val_loss ==
              doctest::Approx(again[m].history.epochs[0].val_loss).epsilon(1e-12));
        CHECK(models[m].params.theta.data == again[m].params.theta.data);
    }

    TrainConfig bad = tc;
    bad.folds = 11;
    CHECK_THROWS_AS(train(dataset, bad, nc), ArgumentError);
}

TEST_CASE("training loss decreases on a separable toy problem") {
    std::vector<SubjectSegments> dataset;
    for (int s = 0; s < 5; ++s) {
        synth::SynthSpec spec;
        spec.duration_s = 20;
        spec.noise_sigma = 0.02;
        spec.seed = 200 + static_cast<uint64_t>(s);
        auto ecg = synth::gen_ecg(spec);
        ecg.record.name = "subj" + std::to_string(s);
        dataset.push_back(record_to_subject(ecg.record));
    }
    TrainConfig tc;
    tc.max_epochs = 3;
    tc.batch_size = 32;
    tc.seed = 6;
    ConvNetConfig nc;
    const auto models = train(dataset, tc, nc);
    int monotone = 0;
    for (const auto& m : models) {
        REQUIRE(m.history.epochs.size() == 3);
        if (m.history.epochs[0].train_loss > m.history.epochs[1].train_loss &&
            m.history.epochs[1].train_loss > m.history.epochs[2].train_loss)
            ++monotone;
    }
    CHECK(monotone >= 4);
}
