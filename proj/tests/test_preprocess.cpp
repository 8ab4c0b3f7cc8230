#include <doctest.h>

#include <cmath>
#include <random>

#include "qrs/errors.hpp"
#include "qrs/preprocess.hpp"

using namespace qrs;
using namespace qrs::pre;

namespace {

EcgRecord make_record(int64_t n, std::vector<int64_t> ann = {}) {
    EcgRecord rec;
    rec.name = "t";
    rec.fs = kPipelineHz;
    rec.signal.assign(static_cast<size_t>(n), 0.0);
    for (int64_t a : ann) rec.annotations.push_back({a, 'N'});
    return rec;
}

} // namespace

TEST_CASE("make_label_stream paints the region around each annotation") {
    SUBCASE("five-sample region at halfwidth 2") {
        const auto rec = make_record(300, {150});
        const auto bits = make_label_stream(rec, 2);
        for (int64_t i = 0; i < 300; ++i)
            CHECK(static_cast<int>(bits[static_cast<size_t>(i)]) ==
                  ((i >= 148 && i <= 152) ? 1 : 0));
    }
    SUBCASE("default width covers 0.05 s per side") {
        const auto rec = make_record(300, {150});
        const auto bits = make_label_stream(rec);
        for (int64_t i = 0; i < 300; ++i)
            CHECK(static_cast<int>(bits[static_cast<size_t>(i)]) ==
                  ((i >= 150 - kLabelHalfWidth && i <= 150 + kLabelHalfWidth) ? 1 : 0));
    }
}

TEST_CASE("make_label_stream edge cases") {
    CHECK(make_label_stream(make_record(100)) == LabelStream(100, 0));

    const auto bits = make_label_stream(make_record(100, {1}), 2);
    for (int64_t i = 0; i < 100; ++i)
        CHECK(static_cast<int>(bits[static_cast<size_t>(i)]) == (i <= 3 ? 1 : 0)); // clipped

    const auto wide = make_label_stream(make_record(100, {1}));
    for (int64_t i = 0; i < 100; ++i)
        CHECK(static_cast<int>(wide[static_cast<size_t>(i)]) == (i <= 1 + kLabelHalfWidth ? 1 : 0));
}

TEST_CASE("make_label_stream run counting") {
    // annotations >= 2*halfwidth+2 apart give one (2*halfwidth+1)-run each
    for (int hw : {2, kLabelHalfWidth}) {
        const auto rec = make_record(1000, {100, 100 + 2 * hw + 2 + 4, 500});
        const auto bits = make_label_stream(rec, hw);
        int runs = 0;
        for (size_t i = 0; i < bits.size(); ++i)
            if (bits[i] && (i == 0 || !bits[i - 1])) ++runs;
        CHECK(runs == 3);
        int64_t ones = 0;
        for (auto b : bits) ones += b;
        CHECK(ones == 3 * (2 * hw + 1));
    }
}

TEST_CASE("segmentize stride arithmetic") {
    SUBCASE("exact stride fit") {
        const auto segs = segmentize(make_record(500));
        REQUIRE(segs.size() == 3);
        CHECK(segs[0].start == 0);
        CHECK(segs[1].start == 100);
        CHECK(segs[2].start == 200);
        for (const auto& s : segs) CHECK(s.valid == 300);
    }
    SUBCASE("remainder adds an end-anchored window") {
        const auto segs = segmentize(make_record(650));
        REQUIRE(segs.size() == 5);
        CHECK(segs[0].start == 0);
        CHECK(segs[1].start == 100);
        CHECK(segs[2].start == 200);
        CHECK(segs[3].start == 300);
        CHECK(segs[4].start == 350);
    }
    SUBCASE("single full window") {
        const auto segs = segmentize(make_record(300));
        REQUIRE(segs.size() == 1);
        CHECK(segs[0].start == 0);
        CHECK(segs[0].valid == 300);
    }
    SUBCASE("short record zero-pads with mask") {
        const auto segs = segmentize(make_record(120));
        REQUIRE(segs.size() == 1);
        CHECK(segs[0].valid == 120);
        CHECK(segs[0].values.size() == 300);
        CHECK(segs[0].labels[200] == 0);
    }
    SUBCASE("empty record is rejected") {
        CHECK_THROWS_AS(segmentize(make_record(0)), ArgumentError);
    }
}

TEST_CASE("segment coverage of the record timeline") {
    for (int64_t len : {300, 500, 1000, 650, 423, 301}) {
        const auto segs = segmentize(make_record(len));
        std::vector<int> cover(static_cast<size_t>(len), 0);
        for (const auto& s : segs)
            for (int i = 0; i < s.valid; ++i) ++cover[static_cast<size_t>(s.start + i)];
        for (int64_t i = 0; i < len; ++i) CHECK(cover[static_cast<size_t>(i)] >= 1);
        // interior samples see the window three times; the end-anchored
        // remainder window can add one extra pass near the tail
        const bool aligned = (len - 300) % 100 == 0;
        for (int64_t i = 200; i <= len - 201; ++i) {
            if (aligned)
                CHECK(cover[static_cast<size_t>(i)] == 3);
            else
                CHECK((cover[static_cast<size_t>(i)] == 3 || cover[static_cast<size_t>(i)] == 4));
        }
    }
}

TEST_CASE("zscore matches the population formula") {
    const std::vector<double> v = {1, 2, 3};
    const auto z = zscore(v);
    CHECK(z[0] == doctest::Approx(-1.2247).epsilon(1e-4));
    CHECK(z[1] == doctest::Approx(0.0));
    CHECK(z[2] == doctest::Approx(1.2247).epsilon(1e-4));
}

TEST_CASE("zscore degenerate and idempotent cases") {
    CHECK(zscore(std::vector<double>{5, 5, 5}) == std::vector<double>{0, 0, 0});

    std::mt19937_64 rng(3);
    std::normal_distribution<double> dist(0, 1);
    std::vector<double> v(300);
    for (double& x : v) x = dist(rng);
    const auto once = zscore(v);
    const auto twice = zscore(once);
    for (size_t i = 0; i < v.size(); ++i) CHECK(std::abs(once[i] - twice[i]) < 1e-9);

    double mean = 0, var = 0;
    for (double x : once) mean += x;
    mean /= static_cast<double>(once.size());
    for (double x : once) var += (x - mean) * (x - mean);
    var /= static_cast<double>(once.size());
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-6);
}

TEST_CASE("aggregate_or basic truth table") {
    std::vector<WindowPrediction> ws(2);
    ws[0] = {0, std::vector<uint8_t>(300, 0), 0};
    ws[1] = {100, std::vector<uint8_t>(300, 0), 0};
    ws[1].bits[50] = 1; // record index 150
    const auto out = aggregate_or(ws, 400);
    CHECK(out[150] == 1);
    CHECK(out[149] == 0);

    std::vector<WindowPrediction> zeros(3);
    for (size_t i = 0; i < 3; ++i) zeros[i] = {static_cast<int64_t>(i) * 100,
                                               std::vector<uint8_t>(300, 0), 0};
    CHECK(aggregate_or(zeros, 500) == PredictionStream(500, 0));
}

TEST_CASE("aggregate_or rejects out-of-bounds windows") {
    std::vector<WindowPrediction> ws(1);
    ws[0] = {300, std::vector<uint8_t>(300, 0), 0};
    CHECK_THROWS_AS(aggregate_or(ws, 400), ArgumentError);
    ws[0].valid = 100; // masked to the record tail: fine
    CHECK_NOTHROW(aggregate_or(ws, 400));
}

TEST_CASE("OR of staggered windows marking one region is idempotent") {
    auto rec = make_record(700, {350});
    const auto labels = make_label_stream(rec);
    std::vector<WindowPrediction> ws;
    for (int64_t start : {200, 300, 350}) {
        WindowPrediction w;
        w.start = start;
        w.bits.assign(300, 0);
        for (int i = 0; i < 300; ++i) w.bits[static_cast<size_t>(i)] =
            labels[static_cast<size_t>(start + i)];
        ws.push_back(std::move(w));
    }
    const auto merged = aggregate_or(ws, 700);
    CHECK(merged == labels);
}

TEST_CASE("slicing labels into windows and OR-ing back is the identity") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        std::uniform_int_distribution<int64_t> len_dist(1, 900);
        const int64_t len = len_dist(rng);
        auto rec = make_record(len);
        std::uniform_int_distribution<int64_t> ann_dist(0, len - 1);
        for (int a = 0; a < 5; ++a) rec.annotations.push_back({ann_dist(rng), 'N'});
        std::sort(rec.annotations.begin(), rec.annotations.end(),
                  [](const Annotation& x, const Annotation& y) {
                      return x.sample_index < y.sample_index;
                  });
        const auto labels = make_label_stream(rec);
        const auto segs = segmentize(rec);
        std::vector<WindowPrediction> ws;
        for (const auto& s : segs) ws.push_back({s.start, s.labels, s.valid});
        CHECK(aggregate_or(ws, len) == labels);
    }
}
