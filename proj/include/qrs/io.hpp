#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qrs/convnet.hpp"
#include "qrs/eval.hpp"
#include "qrs/gru.hpp"
#include "qrs/record.hpp"

namespace qrs::io {

// Portable record container: <stem>.json metadata next to <stem>.f32 raw
// little-endian float32 signal. Every pipeline stage reads this, whether the
// record came from WFDB files or the synthetic generator.
void save_record_container(const EcgRecord& record, const std::filesystem::path& dir);
EcgRecord load_record_container(const std::filesystem::path& json_path);

// All containers in a directory, sorted by record name.
std::vector<EcgRecord> load_record_dir(const std::filesystem::path& dir);

// Model files: <stem>.json manifest + <stem>.f32 parameter blob.
void save_convnet(const nn::ModelParams& params, const nn::ConvNetConfig& cfg, uint64_t seed,
                  const std::filesystem::path& stem);
std::pair<nn::ModelParams, nn::ConvNetConfig> load_convnet(const std::filesystem::path& json_path);

void save_gru(const gru::GruParams& params, const gru::GruConfig& cfg, uint64_t seed,
              const std::filesystem::path& stem);
std::pair<gru::GruParams, gru::GruConfig> load_gru(const std::filesystem::path& json_path);

void save_history_csv(const nn::TrainHistory& history, const std::filesystem::path& path);

void save_report_json(const eval::EvalReport& report, const std::filesystem::path& path);
void save_report_csv(const eval::EvalReport& report, const std::filesystem::path& path);

struct GridRow {
    int layers = 0;
    int seq_len_s = 0;
    std::string database;
    double mean_f1 = 0, std_f1 = 0;
};
void save_grid_csv(const std::vector<GridRow>& rows, const std::filesystem::path& path);

// Node debug dump: start_loc, confidence, q_loc, support_score.
void save_nodes_csv(const std::vector<post::QrsNode>& nodes, const std::vector<double>& derivative,
                    const std::filesystem::path& path);

void save_peaks_text(const std::vector<int64_t>& peaks, const std::filesystem::path& path);

// FNV-1a over the canonical JSON dump; stable across runs and platforms.
std::string config_hash(const std::string& canonical_json);

std::vector<float> read_f32(const std::filesystem::path& path);
void write_f32(const std::vector<float>& values, const std::filesystem::path& path);

} // namespace qrs::io
