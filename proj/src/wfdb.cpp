#include "qrs/wfdb.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "qrs/errors.hpp"

namespace qrs::wfdb {

namespace {

// Code -> mnemonic map from the standard WFDB annotation table.
constexpr int kMaxCode = 41;
constexpr std::array<char, kMaxCode + 1> kMnemonics = {
    '\0', 'N', 'L', 'R', 'a', 'V',  'F', 'J', 'A', 'S', 'E',  'j',  '/',  'Q',
    '~',  '\0', '|', '\0', 's', 'T', '*', 'D', '"', '=', 'p', 'B',  '^',  't',
    '+',  'u', '?', '!', '[', ']',  'e', 'n', '@', 'x', 'f',  '(',  ')',  'r'};

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

int sign_extend_12(int v) { return (v & 0x800) ? v - 0x1000 : v; }

// Signal-line gain field may look like "200", "200(1024)", "200/mV" or a
// combination; the parenthesised baseline, when present, overrides adc_zero.
// Returns whether a baseline was given.
bool parse_gain_field(const std::string& field, SignalSpec& spec) {
    size_t pos = 0;
    double gain = std::stod(field, &pos);
    spec.adc_gain = gain;
    if (pos < field.size() && field[pos] == '(') {
        size_t close = field.find(')', pos);
        if (close != std::string::npos) {
            spec.adc_zero = std::stoi(field.substr(pos + 1, close - pos - 1));
            return true;
        }
    }
    return false;
}

std::vector<uint8_t> read_file_bytes(const std::string& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInput(std::string(what) + " file not found: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return bytes;
}

uint16_t read_le16(std::span<const uint8_t> bytes, size_t pos) {
    return static_cast<uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
}

void push_le16(std::vector<uint8_t>& out, uint16_t word) {
    out.push_back(static_cast<uint8_t>(word & 0xFF));
    out.push_back(static_cast<uint8_t>(word >> 8));
}

} // namespace

char code_mnemonic(int code) {
    if (code < 1 || code > kMaxCode) return '\0';
    return kMnemonics[static_cast<size_t>(code)];
}

int mnemonic_code(char mnemonic) {
    for (int c = 1; c <= kMaxCode; ++c)
        if (kMnemonics[static_cast<size_t>(c)] == mnemonic) return c;
    return -1;
}

const std::string& default_beat_set() {
    static const std::string set = "NLRBAJSVFEQ/";
    return set;
}

RecordHeader parse_header(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;

    // Skip comments and blank lines before the record line.
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line[0] != '#' && line.find_first_not_of(" \t\r") != std::string::npos)
            break;
    }
    auto fields = split_ws(line);
    if (fields.size() < 4)
        throw ParseError("header line " + std::to_string(line_no) +
                         ": expected 'name n_signals fs n_samples', got '" + line + "'");

    RecordHeader hdr;
    try {
        hdr.record_name = fields[0];
        // record name may carry /segment or :suffix decorations
        if (auto slash = hdr.record_name.find('/'); slash != std::string::npos)
            hdr.record_name.resize(slash);
        hdr.n_signals = std::stoi(fields[1]);
        hdr.sampling_hz = std::stod(fields[2]);
        hdr.n_samples = std::stoll(fields[3]);
    } catch (const std::exception&) {
        throw ParseError("header line " + std::to_string(line_no) + ": bad numeric field in '" +
                         line + "'");
    }
    if (hdr.n_signals < 1)
        throw ParseError("header line " + std::to_string(line_no) + ": n_signals must be >= 1");
    if (hdr.sampling_hz <= 0)
        throw ParseError("header line " + std::to_string(line_no) + ": sampling rate must be > 0");

    for (int s = 0; s < hdr.n_signals; ++s) {
        do {
            if (!std::getline(in, line))
                throw ParseError("header: expected " + std::to_string(hdr.n_signals) +
                                 " signal lines, found " + std::to_string(s));
            ++line_no;
        } while (line.empty() || line[0] == '#' ||
                 line.find_first_not_of(" \t\r") == std::string::npos);

        auto f = split_ws(line);
        if (f.size() < 2)
            throw ParseError("header line " + std::to_string(line_no) + ": malformed signal line '" +
                             line + "'");
        SignalSpec spec;
        spec.file_name = f[0];
        try {
            // format may carry xN / :skew / +offset decorations; the leading
            // integer is the storage format proper.
            spec.storage_format = std::stoi(f[1]);
            bool has_baseline = false;
            if (f.size() > 2) has_baseline = parse_gain_field(f[2], spec);
            if (spec.adc_gain == 0.0) spec.adc_gain = 200.0; // WFDB default
            if (!has_baseline && f.size() > 4) spec.adc_zero = std::stoi(f[4]);
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception&) {
            throw ParseError("header line " + std::to_string(line_no) +
                             ": bad numeric field in '" + line + "'");
        }
        if (f.size() > 8) {
            // description is everything after the first 8 fields
            std::string desc;
            for (size_t i = 8; i < f.size(); ++i) {
                if (!desc.empty()) desc += ' ';
                desc += f[i];
            }
            spec.lead_name = desc;
        }
        if (spec.storage_format != 212 && spec.storage_format != 16)
            throw UnsupportedFormat("signal " + std::to_string(s) + ": storage format " +
                                    std::to_string(spec.storage_format) + " not supported");
        hdr.signals.push_back(std::move(spec));
    }
    return hdr;
}

std::vector<int> decode_212(std::span<const uint8_t> bytes, int64_t n_samples_total) {
    if (n_samples_total < 0) throw ArgumentError("decode_212: negative sample count");
    const int64_t groups = (n_samples_total + 1) / 2;
    if (static_cast<int64_t>(bytes.size()) < groups * 3)
        throw ParseError("decode_212: need " + std::to_string(groups * 3) + " bytes for " +
                         std::to_string(n_samples_total) + " samples, got " +
                         std::to_string(bytes.size()));

    std::vector<int> out;
    out.reserve(static_cast<size_t>(n_samples_total));
    for (int64_t g = 0; g < groups; ++g) {
        const uint8_t b0 = bytes[static_cast<size_t>(g * 3)];
        const uint8_t b1 = bytes[static_cast<size_t>(g * 3 + 1)];
        const uint8_t b2 = bytes[static_cast<size_t>(g * 3 + 2)];
        out.push_back(sign_extend_12(((b1 & 0x0F) << 8) | b0));
        if (static_cast<int64_t>(out.size()) < n_samples_total)
            out.push_back(sign_extend_12(((b1 & 0xF0) << 4) | b2));
    }
    return out;
}

std::vector<int> decode_16(std::span<const uint8_t> bytes) {
    if (bytes.size() % 2 != 0)
        throw ParseError("decode_16: odd byte count " + std::to_string(bytes.size()));
    std::vector<int> out;
    out.reserve(bytes.size() / 2);
    for (size_t i = 0; i < bytes.size(); i += 2)
        out.push_back(static_cast<int16_t>(read_le16(bytes, i)));
    return out;
}

std::vector<uint8_t> encode_212(std::span<const int> samples) {
    std::vector<uint8_t> out;
    out.reserve((samples.size() + 1) / 2 * 3);
    for (size_t i = 0; i < samples.size(); i += 2) {
        const int s1 = samples[i];
        const int s2 = (i + 1 < samples.size()) ? samples[i + 1] : 0;
        if (s1 < -2048 || s1 > 2047 || s2 < -2048 || s2 > 2047)
            throw ArgumentError("encode_212: sample out of 12-bit range");
        const unsigned u1 = static_cast<unsigned>(s1) & 0xFFF;
        const unsigned u2 = static_cast<unsigned>(s2) & 0xFFF;
        out.push_back(static_cast<uint8_t>(u1 & 0xFF));
        out.push_back(static_cast<uint8_t>(((u1 >> 8) & 0x0F) | ((u2 >> 8) << 4)));
        out.push_back(static_cast<uint8_t>(u2 & 0xFF));
    }
    return out;
}

std::vector<uint8_t> encode_16(std::span<const int> samples) {
    std::vector<uint8_t> out;
    out.reserve(samples.size() * 2);
    for (int s : samples) {
        if (s < -32768 || s > 32767) throw ArgumentError("encode_16: sample out of 16-bit range");
        push_le16(out, static_cast<uint16_t>(static_cast<int16_t>(s)));
    }
    return out;
}

std::vector<Annotation> parse_annotations(std::span<const uint8_t> bytes) {
    std::vector<Annotation> out;
    int64_t time = 0;
    size_t pos = 0;
    bool terminated = false;

    while (!terminated) {
        if (pos + 2 > bytes.size()) throw ParseError("annotations: stream ends without terminator");
        const uint16_t word = read_le16(bytes, pos);
        pos += 2;
        const int code = word >> 10;
        const int incr = word & 0x3FF;

        switch (code) {
        case 0:
            if (incr == 0) {
                terminated = true;
            }
            // code 0 with nonzero increment is a NOTQRS filler; time still advances
            else {
                time += incr;
            }
            break;
        case kCodeSkip: {
            if (pos + 4 > bytes.size()) throw ParseError("annotations: truncated SKIP interval");
            const uint16_t hi = read_le16(bytes, pos);
            const uint16_t lo = read_le16(bytes, pos + 2);
            pos += 4;
            time += static_cast<int32_t>((static_cast<uint32_t>(hi) << 16) | lo);
            break;
        }
        case kCodeAux: {
            size_t len = static_cast<size_t>(incr);
            len += len & 1; // payload padded to even length
            if (pos + len > bytes.size()) throw ParseError("annotations: truncated AUX payload");
            pos += len;
            break;
        }
        case kCodeNum:
        case kCodeSub:
        case kCodeChn:
            break; // bookkeeping fields, discarded
        default: {
            time += incr;
            const char mnemonic = code_mnemonic(code);
            if (mnemonic != '\0') out.push_back({time, mnemonic});
            break;
        }
        }
    }
    return out;
}

std::vector<uint8_t> encode_annotations(std::span<const Annotation> annotations) {
    std::vector<uint8_t> out;
    int64_t prev = 0;
    for (const auto& a : annotations) {
        const int code = mnemonic_code(a.beat_code);
        if (code < 0) throw ArgumentError(std::string("encode_annotations: unknown mnemonic '") +
                                          a.beat_code + "'");
        int64_t delta = a.sample_index - prev;
        if (delta < 0) throw ArgumentError("encode_annotations: indices must be non-decreasing");
        if (delta > 0x3FF) {
            push_le16(out, static_cast<uint16_t>(kCodeSkip << 10));
            push_le16(out, static_cast<uint16_t>((delta >> 16) & 0xFFFF));
            push_le16(out, static_cast<uint16_t>(delta & 0xFFFF));
            delta = 0;
        }
        push_le16(out, static_cast<uint16_t>((code << 10) | static_cast<int>(delta)));
        prev = a.sample_index;
    }
    push_le16(out, 0); // terminator
    return out;
}

std::vector<Annotation> filter_beats(std::span<const Annotation> annotations,
                                     const std::string& valid_set) {
    std::vector<Annotation> out;
    out.reserve(annotations.size());
    for (const auto& a : annotations)
        if (valid_set.find(a.beat_code) != std::string::npos) out.push_back(a);
    return out;
}

EcgRecord resample_record(const EcgRecord& record, double target_hz) {
    if (record.fs <= 0 || target_hz <= 0)
        throw ArgumentError("resample_record: sampling rates must be positive");

    const int64_t n_src = record.n_samples();
    const double ratio = target_hz / record.fs;
    const int64_t n_out = static_cast<int64_t>(std::llround(static_cast<double>(n_src) * ratio));

    EcgRecord out;
    out.name = record.name;
    out.fs = target_hz;
    out.source = record.source;
    out.signal.resize(static_cast<size_t>(n_out));

    const double step = record.fs / target_hz; // source samples per output sample
    for (int64_t k = 0; k < n_out; ++k) {
        const double p = static_cast<double>(k) * step;
        const int64_t i0 = std::min(static_cast<int64_t>(p), n_src - 1);
        const int64_t i1 = std::min(i0 + 1, n_src - 1);
        const double frac = p - static_cast<double>(i0);
        out.signal[static_cast<size_t>(k)] =
            record.signal[static_cast<size_t>(i0)] * (1.0 - frac) +
            record.signal[static_cast<size_t>(i1)] * frac;
    }

    int64_t last = -1;
    for (const auto& a : record.annotations) {
        int64_t idx = std::llround(static_cast<double>(a.sample_index) * ratio);
        idx = std::clamp<int64_t>(idx, 0, n_out > 0 ? n_out - 1 : 0);
        if (n_out == 0) break;
        if (idx == last) {
            ++out.annotation_collisions;
            continue;
        }
        out.annotations.push_back({idx, a.beat_code});
        last = idx;
    }
    return out;
}

EcgRecord load_record(const std::string& path_prefix, const std::string& valid_set,
                      double target_hz) {
    std::ifstream hea(path_prefix + ".hea");
    if (!hea) throw MissingInput("header file not found: " + path_prefix + ".hea");
    std::stringstream buf;
    buf << hea.rdbuf();
    const RecordHeader hdr = parse_header(buf.str());

    const auto dat = read_file_bytes(path_prefix + ".dat", "signal");
    const SignalSpec& lead = hdr.signals.front(); // primary lead only

    // All signals of a record share one .dat here (the common PhysioNet
    // layout); samples are interleaved frame by frame.
    std::vector<int> adus;
    if (lead.storage_format == 212) {
        const int64_t total = hdr.n_samples * hdr.n_signals;
        adus = decode_212(dat, total);
    } else {
        adus = decode_16(dat);
    }

    EcgRecord rec;
    rec.name = hdr.record_name;
    rec.fs = hdr.sampling_hz;
    rec.source = hdr;
    rec.signal.reserve(static_cast<size_t>(hdr.n_samples));
    for (int64_t i = 0; i < hdr.n_samples; ++i) {
        const size_t pos = static_cast<size_t>(i * hdr.n_signals);
        if (pos >= adus.size()) throw ParseError("signal file shorter than header n_samples");
        rec.signal.push_back((adus[pos] - lead.adc_zero) / lead.adc_gain);
    }

    const auto atr = read_file_bytes(path_prefix + ".atr", "annotation");
    auto anns = parse_annotations(atr);
    anns = filter_beats(anns, valid_set);
    for (const auto& a : anns)
        if (a.sample_index >= hdr.n_samples)
            throw ParseError("annotation index " + std::to_string(a.sample_index) +
                             " beyond record end");
    rec.annotations = std::move(anns);

    return resample_record(rec, target_hz);
}

void write_record(const std::string& path_prefix, const std::string& record_name,
                  std::span<const double> signal_mv, double fs,
                  std::span<const Annotation> annotations, int storage_format, double adc_gain,
                  int adc_zero) {
    if (storage_format != 212 && storage_format != 16)
        throw UnsupportedFormat("write_record: format " + std::to_string(storage_format));

    std::vector<int> adus;
    adus.reserve(signal_mv.size());
    const int lo = storage_format == 212 ? -2048 : -32768;
    const int hi = storage_format == 212 ? 2047 : 32767;
    for (double v : signal_mv) {
        const int q = static_cast<int>(std::llround(v * adc_gain)) + adc_zero;
        adus.push_back(std::clamp(q, lo, hi));
    }

    std::ofstream hea(path_prefix + ".hea");
    hea << record_name << " 1 " << fs << " " << signal_mv.size() << "\n";
    hea << record_name << ".dat " << storage_format << " " << adc_gain << " 12 " << adc_zero
        << " 0 0 0 ECG\n";

    const auto dat = storage_format == 212 ? encode_212(adus) : encode_16(adus);
    std::ofstream datf(path_prefix + ".dat", std::ios::binary);
    datf.write(reinterpret_cast<const char*>(dat.data()), static_cast<std::streamsize>(dat.size()));

    const auto atr = encode_annotations(annotations);
    std::ofstream atrf(path_prefix + ".atr", std::ios::binary);
    atrf.write(reinterpret_cast<const char*>(atr.data()), static_cast<std::streamsize>(atr.size()));
}

} // namespace qrs::wfdb
