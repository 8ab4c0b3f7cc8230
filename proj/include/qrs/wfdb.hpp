#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qrs/record.hpp"

namespace qrs::wfdb {

// Annotation type codes used by MIT-format .atr files. Codes 59..63 are
// pseudo-annotations (they carry no beat, only bookkeeping).
enum : int {
    kCodeSkip = 59,
    kCodeNum = 60,
    kCodeSub = 61,
    kCodeChn = 62,
    kCodeAux = 63,
};

// Mnemonic for an annotation code (1..49), or '\0' if the code is undefined.
char code_mnemonic(int code);

// Annotation code for a mnemonic, or -1 if unknown.
int mnemonic_code(char mnemonic);

// The beat types kept by default: N L R B A J S V F E Q and the paced beat '/'.
const std::string& default_beat_set();

RecordHeader parse_header(const std::string& text);

// Format 212: 3-byte groups carrying two 12-bit two's-complement samples.
//   s1 = sx12((b1 & 0x0F) << 8 | b0), s2 = sx12((b1 & 0xF0) << 4 | b2)
std::vector<int> decode_212(std::span<const uint8_t> bytes, int64_t n_samples_total);

// Format 16: little-endian 16-bit two's-complement samples.
std::vector<int> decode_16(std::span<const uint8_t> bytes);

// Test-support encoders, inverse of the decoders above.
std::vector<uint8_t> encode_212(std::span<const int> samples);
std::vector<uint8_t> encode_16(std::span<const int> samples);

// MIT annotation stream: little-endian 16-bit words, code in the high 6 bits,
// sample increment in the low 10. Cumulative indices; every word with a
// defined mnemonic is emitted, pseudo-annotations are consumed silently.
std::vector<Annotation> parse_annotations(std::span<const uint8_t> bytes);

std::vector<uint8_t> encode_annotations(std::span<const Annotation> annotations);

std::vector<Annotation> filter_beats(std::span<const Annotation> annotations,
                                     const std::string& valid_set = default_beat_set());

// Linear interpolation of signal onto a uniform `target_hz` grid; annotation
// indices mapped with round(idx * target / fs_src), first kept on collision.
EcgRecord resample_record(const EcgRecord& record, double target_hz = kPipelineHz);

// Read <path_prefix>.hea/.dat/.atr, decode the first signal to mV, filter
// beats, and resample to 100 Hz.
EcgRecord load_record(const std::string& path_prefix,
                      const std::string& valid_set = default_beat_set(),
                      double target_hz = kPipelineHz);

// Fixture writer: emits <path_prefix>.hea/.dat/.atr for a single-lead record.
// Signal values are quantized with the given gain/zero into `storage_format`.
void write_record(const std::string& path_prefix, const std::string& record_name,
                  std::span<const double> signal_mv, double fs,
                  std::span<const Annotation> annotations, int storage_format = 212,
                  double adc_gain = 200.0, int adc_zero = 0);

} // namespace qrs::wfdb
