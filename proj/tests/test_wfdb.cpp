#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "qrs/errors.hpp"
#include "qrs/wfdb.hpp"

using namespace qrs;
using namespace qrs::wfdb;

TEST_CASE("parse_header reads the record line and signal specs") {
    const std::string text =
        "100 2 360 650000\n"
        "100.dat 212 200 11 1024 995 -22131 0 MLII\n"
        "100.dat 212 200 11 1024 1011 20052 0 V5\n";
    const auto hdr = parse_header(text);
    CHECK(hdr.record_name == "100");
    CHECK(hdr.n_signals == 2);
    CHECK(hdr.sampling_hz == doctest::Approx(360.0));
    CHECK(hdr.n_samples == 650000);
    REQUIRE(hdr.signals.size() == 2);
    CHECK(hdr.signals[0].storage_format == 212);
    CHECK(hdr.signals[0].adc_gain == doctest::Approx(200.0));
    CHECK(hdr.signals[0].adc_zero == 1024);
    CHECK(hdr.signals[0].lead_name == "MLII");
}

TEST_CASE("parse_header accepts a zero-length record") {
    const auto hdr = parse_header("x 1 100 0\nx.dat 16 100 12 0 0 0 0 ECG\n");
    CHECK(hdr.n_samples == 0);
    CHECK(hdr.signals[0].storage_format == 16);
}

TEST_CASE("parse_header rejects malformed input") {
    CHECK_THROWS_AS(parse_header("100 2\n"), ParseError);
    CHECK_THROWS_AS(parse_header(""), ParseError);
    CHECK_THROWS_AS(parse_header("100 1 360 1000\n100.dat 80 200\n"), UnsupportedFormat);
    CHECK_THROWS_AS(parse_header("100 2 360 1000\n100.dat 212 200\n"), ParseError); // one line short
    CHECK_THROWS_AS(parse_header("100 0 360 1000\n"), ParseError);
    CHECK_THROWS_AS(parse_header("100 1 -5 1000\nx.dat 212 200\n"), ParseError);
}

TEST_CASE("parse_header handles gain with baseline and units") {
    const auto hdr = parse_header("r 1 250 100\nr.dat 212 100.5(512)/mV 12 7 0 0 0 Lead\n");
    CHECK(hdr.signals[0].adc_gain == doctest::Approx(100.5));
    CHECK(hdr.signals[0].adc_zero == 512); // baseline overrides the adc_zero field
}

// Expected values below were frozen from an independent reference decode of
// the documented 3-byte group layout.
TEST_CASE("decode_212 worked byte examples") {
    const std::vector<uint8_t> a = {0xE8, 0x3F, 0x01};
    CHECK(decode_212(a, 2) == std::vector<int>{-24, 769});
    const std::vector<uint8_t> b = {0xE8, 0xFF, 0x01};
    CHECK(decode_212(b, 2) == std::vector<int>{-24, -255});
    const std::vector<uint8_t> zero = {0x00, 0x00, 0x00};
    CHECK(decode_212(zero, 2) == std::vector<int>{0, 0});
    const std::vector<uint8_t> c = {0x01, 0x08, 0x00};
    CHECK(decode_212(c, 1) == std::vector<int>{-2047}); // second packed sample discarded
}

TEST_CASE("decode_212 rejects truncated streams") {
    const std::vector<uint8_t> bytes = {0xE8, 0x3F};
    CHECK_THROWS_AS(decode_212(bytes, 2), ParseError);
    CHECK_THROWS_AS(decode_212({}, 1), ParseError);
    CHECK(decode_212({}, 0).empty());
}

TEST_CASE("decode_16 two's complement") {
    CHECK(decode_16(std::vector<uint8_t>{0xFF, 0xFF}) == std::vector<int>{-1});
    CHECK(decode_16(std::vector<uint8_t>{0x00, 0x80}) == std::vector<int>{-32768});
    CHECK(decode_16(std::vector<uint8_t>{0x34, 0x12}) == std::vector<int>{4660});
    CHECK_THROWS_AS(decode_16(std::vector<uint8_t>{0x01}), ParseError);
}

TEST_CASE("encode/decode 212 round-trips well-formed byte groups") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> dist(-2048, 2047);
    std::vector<int> samples(512);
    for (int& s : samples) s = dist(rng);
    const auto bytes = encode_212(samples);
    CHECK(decode_212(bytes, static_cast<int64_t>(samples.size())) == samples);
    CHECK(encode_212(decode_212(bytes, static_cast<int64_t>(samples.size()))) == bytes);
}

TEST_CASE("formats 212 and 16 agree on the same waveform") {
    std::vector<int> wave;
    for (int i = 0; i < 200; ++i)
        wave.push_back(static_cast<int>(std::lround(1000 * std::sin(i * 0.1))));
    const auto from212 = decode_212(encode_212(wave), static_cast<int64_t>(wave.size()));
    const auto from16 = decode_16(encode_16(wave));
    CHECK(from212 == from16);
}

TEST_CASE("parse_annotations cumulative indices") {
    // word 0x04C8: code 1 (N), increment 200
    const std::vector<uint8_t> one = {0xC8, 0x04, 0x00, 0x00};
    const auto anns = parse_annotations(one);
    REQUIRE(anns.size() == 1);
    CHECK(anns[0].sample_index == 200);
    CHECK(anns[0].beat_code == 'N');

    const std::vector<uint8_t> empty = {0x00, 0x00};
    CHECK(parse_annotations(empty).empty());

    // two N words, increments 200 then 300: indices 200 and 500
    const std::vector<uint8_t> two = {0xC8, 0x04, 0x2C, 0x05, 0x00, 0x00};
    const auto cum = parse_annotations(two);
    REQUIRE(cum.size() == 2);
    CHECK(cum[0].sample_index == 200);
    CHECK(cum[1].sample_index == 500);
}

TEST_CASE("parse_annotations pseudo-codes") {
    SUBCASE("SKIP shifts time") {
        // SKIP word, 4-byte interval 70000 (0x00011170), then N at +10
        std::vector<uint8_t> bytes;
        auto push = [&](uint16_t w) {
            bytes.push_back(static_cast<uint8_t>(w & 0xFF));
            bytes.push_back(static_cast<uint8_t>(w >> 8));
        };
        push(static_cast<uint16_t>(59u << 10));
        push(0x0001); // high word first
        push(0x1170);
        push(static_cast<uint16_t>((1u << 10) | 10));
        push(0);
        const auto anns = parse_annotations(bytes);
        REQUIRE(anns.size() == 1);
        CHECK(anns[0].sample_index == 70010);
    }
    SUBCASE("AUX payload skipped, odd length padded") {
        std::vector<uint8_t> bytes;
        auto push = [&](uint16_t w) {
            bytes.push_back(static_cast<uint8_t>(w & 0xFF));
            bytes.push_back(static_cast<uint8_t>(w >> 8));
        };
        push(static_cast<uint16_t>((1u << 10) | 5));
        push(static_cast<uint16_t>((63u << 10) | 3)); // 3 payload bytes -> 4 with pad
        bytes.insert(bytes.end(), {'a', 'b', 'c', 0});
        push(static_cast<uint16_t>((5u << 10) | 7)); // V at +7
        push(0);
        const auto anns = parse_annotations(bytes);
        REQUIRE(anns.size() == 2);
        CHECK(anns[0].beat_code == 'N');
        CHECK(anns[1].beat_code == 'V');
        CHECK(anns[1].sample_index == 12);
    }
    SUBCASE("truncated payloads raise ParseError") {
        const std::vector<uint8_t> skip_cut = {0x00, static_cast<uint8_t>(59 << 2), 0x01, 0x00};
        CHECK_THROWS_AS(parse_annotations(skip_cut), ParseError);
        const std::vector<uint8_t> aux_cut = {0x04, static_cast<uint8_t>(63 << 2), 'a'};
        CHECK_THROWS_AS(parse_annotations(aux_cut), ParseError);
        const std::vector<uint8_t> no_term = {0xC8, 0x04};
        CHECK_THROWS_AS(parse_annotations(no_term), ParseError);
    }
}

TEST_CASE("parse_annotations survives fuzzed truncation") {
    // healthy stream (no interior zero words), chopped at every byte offset:
    // each cut removes the terminator, so every prefix must raise ParseError
    std::vector<Annotation> anns;
    for (int i = 0; i < 40; ++i) anns.push_back({i * 97 + 13, i % 3 == 0 ? 'V' : 'N'});
    const auto bytes = encode_annotations(anns);
    REQUIRE(parse_annotations(bytes).size() == anns.size());
    for (size_t cut = 0; cut + 1 < bytes.size(); ++cut) {
        std::vector<uint8_t> shortened(bytes.begin(), bytes.begin() + static_cast<ptrdiff_t>(cut));
        CHECK_THROWS_AS(parse_annotations(shortened), ParseError);
    }
}

TEST_CASE("annotation round-trip through encode") {
    std::vector<Annotation> anns = {{13, 'N'}, {210, 'V'}, {5000, '/'}, {200000, 'Q'}};
    const auto bytes = encode_annotations(anns);
    const auto back = parse_annotations(bytes);
    REQUIRE(back.size() == anns.size());
    for (size_t i = 0; i < anns.size(); ++i) {
        CHECK(back[i].sample_index == anns[i].sample_index);
        CHECK(back[i].beat_code == anns[i].beat_code);
    }
}

TEST_CASE("filter_beats keeps only the valid set") {
    std::vector<Annotation> anns = {{10, 'N'}, {50, '+'}, {90, 'V'}};
    const auto kept = filter_beats(anns);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].sample_index == 10);
    CHECK(kept[1].sample_index == 90);

    CHECK(filter_beats(std::vector<Annotation>{}).empty());
    CHECK(filter_beats(std::vector<Annotation>{{5, 'x'}}).empty());
    // paced beats are in the default set per the stated list
    CHECK(filter_beats(std::vector<Annotation>{{5, '/'}}).size() == 1);
    CHECK(filter_beats(std::vector<Annotation>{{5, '/'}}, "NLRBAJSVFEQ").empty());
}

TEST_CASE("resample_record maps signal and annotations to 100 Hz") {
    SUBCASE("constant signal keeps its value and scales length") {
        EcgRecord rec;
        rec.fs = 360;
        rec.signal.assign(720, 2.5);
        const auto out = resample_record(rec);
        CHECK(out.n_samples() == 200);
        CHECK(out.fs == doctest::Approx(100.0));
        for (double v : out.signal) CHECK(v == doctest::Approx(2.5));
    }
    SUBCASE("annotation index scales by the rate ratio") {
        EcgRecord rec;
        rec.fs = 360;
        rec.signal.assign(720, 0.0);
        rec.annotations = {{360, 'N'}};
        const auto out = resample_record(rec);
        REQUIRE(out.annotations.size() == 1);
        CHECK(out.annotations[0].sample_index == 100);
    }
    SUBCASE("linear ramp is reproduced exactly") {
        EcgRecord rec;
        rec.fs = 250;
        rec.signal.resize(500);
        for (size_t i = 0; i < rec.signal.size(); ++i) rec.signal[i] = static_cast<double>(i);
        const auto out = resample_record(rec);
        for (int64_t k = 0; k < out.n_samples(); ++k)
            CHECK(out.signal[static_cast<size_t>(k)] == doctest::Approx(k * 2.5).epsilon(1e-12));
    }
    SUBCASE("upsampling does not crash") {
        EcgRecord rec;
        rec.fs = 98;
        rec.signal.assign(98, 1.0);
        const auto out = resample_record(rec);
        CHECK(out.n_samples() == 100);
    }
    SUBCASE("bad rates raise ArgumentError") {
        EcgRecord rec;
        rec.fs = 0;
        rec.signal.assign(10, 0.0);
        CHECK_THROWS_AS(resample_record(rec), ArgumentError);
        rec.fs = 100;
        CHECK_THROWS_AS(resample_record(rec, -1), ArgumentError);
    }
    SUBCASE("collisions keep the first annotation") {
        EcgRecord rec;
        rec.fs = 400; // 4:1 ratio
        rec.signal.assign(400, 0.0);
        rec.annotations = {{100, 'N'}, {101, 'V'}, {200, 'N'}};
        const auto out = resample_record(rec);
        REQUIRE(out.annotations.size() == 2);
        CHECK(out.annotations[0].sample_index == 25);
        CHECK(out.annotations[0].beat_code == 'N');
        CHECK(out.annotation_collisions == 1);
    }
}

TEST_CASE("resampled annotation error is at most half a sample") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> fs_dist(101.0, 999.0);
    for (int trial = 0; trial < 50; ++trial) {
        const double fs = fs_dist(rng);
        EcgRecord rec;
        rec.fs = fs;
        rec.signal.assign(static_cast<size_t>(fs * 10), 0.0);
        std::uniform_int_distribution<int64_t> idx_dist(0, rec.n_samples() - 1);
        const int64_t idx = idx_dist(rng);
        rec.annotations = {{idx, 'N'}};
        const auto out = resample_record(rec);
        REQUIRE(out.annotations.size() == 1);
        const double exact = static_cast<double>(idx) * 100.0 / fs;
        CHECK(std::abs(static_cast<double>(out.annotations[0].sample_index) - exact) <= 0.5);
    }
}

TEST_CASE("resample preserves annotation count without collisions") {
    EcgRecord rec;
    rec.fs = 360;
    rec.signal.assign(3600, 0.0);
    for (int i = 0; i < 10; ++i) rec.annotations.push_back({i * 350 + 20, 'N'});
    const auto out = resample_record(rec);
    CHECK(out.annotations.size() == rec.annotations.size());
    CHECK(out.annotation_collisions == 0);
}

TEST_CASE("load_record reads a written fixture and converts to mV") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "qrs_wfdb_fixture";
    fs::create_directories(dir);
    const std::string prefix = (dir / "t01").string();

    std::vector<double> signal(720);
    for (size_t i = 0; i < signal.size(); ++i) signal[i] = std::sin(static_cast<double>(i) * 0.05);
    std::vector<Annotation> anns = {{180, 'N'}, {540, 'V'}, {600, '+'}};
    write_record(prefix, "t01", signal, 360.0, anns);

    const auto rec = load_record(prefix);
    CHECK(rec.fs == doctest::Approx(100.0));
    CHECK(rec.n_samples() == 200);
    REQUIRE(rec.annotations.size() == 2); // '+' filtered out
    CHECK(rec.annotations[0].sample_index == 50);
    CHECK(rec.annotations[1].sample_index == 150);
    // quantization error bounded by 1/(2*gain)
    CHECK(std::abs(rec.signal[50] - std::sin(180 * 0.05)) < 0.01);

    fs::remove(prefix + ".atr");
    CHECK_THROWS_AS(load_record(prefix), MissingInput);
}
