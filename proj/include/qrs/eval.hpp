#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qrs/convnet.hpp"
#include "qrs/gru.hpp"
#include "qrs/postprocess.hpp"
#include "qrs/record.hpp"

namespace qrs::eval {

constexpr int64_t kDefaultTolSamples = 15; // 150 ms at 100 Hz

struct MatchResult {
    int64_t tp = 0, fp = 0, fn = 0;
    std::vector<std::pair<int64_t, int64_t>> pairs; // (predicted, annotated)
};

// Greedy in-order one-to-one matching of sorted beat locations within +-tol,
// preferring the nearer candidate where the lookahead shows no better use for
// it. Cardinality equals the optimal bipartite matching.
MatchResult match_beats(std::span<const int64_t> predicted, std::span<const int64_t> annotated,
                        int64_t tol = kDefaultTolSamples);

// 2*ppv*sens / (ppv+sens); 0 when both are 0.
double f1(double ppv, double sensitivity);

struct RecordReport {
    std::string record;
    MatchResult match;
    double ppv = 0, sensitivity = 0, f1 = 0;
};

// Applies the selected post-processing chain to the prediction stream,
// localizes peaks and scores them against the record annotations.
RecordReport evaluate_record(const EcgRecord& record, std::span<const uint8_t> prediction,
                             post::Path path, int64_t tol = kDefaultTolSamples,
                             const gru::GruParams* gru_params = nullptr,
                             const gru::GruConfig* gru_cfg = nullptr,
                             bool strict_support = false);

struct Database {
    std::string name;
    std::vector<EcgRecord> records;
};

struct ModelScore {
    int fold = 0;
    int64_t tp = 0, fp = 0, fn = 0;
    double ppv = 0, sensitivity = 0, f1 = 0; // micro (pooled) by default
};

struct DatabaseRow {
    std::string database;
    int depth = 0;
    std::string path;
    double mean_f1 = 0, std_f1 = 0;
    int64_t tp = 0, fp = 0, fn = 0; // pooled over the fold models
    std::vector<ModelScore> per_model;
    std::vector<RecordReport> records; // reports of the last fold model
};

struct EvalReport {
    int64_t tol = kDefaultTolSamples;
    bool macro = false;
    std::vector<DatabaseRow> rows;
};

struct EvalOptions {
    post::Path path = post::Path::Advanced;
    int64_t tol = kDefaultTolSamples;
    bool strict_support = false;
    bool macro = false; // mean of per-record F1 instead of pooled counts
};

// Full cross-database protocol for one depth: every fold model scores every
// database; mean and standard deviation of F1 are taken across the five
// models. path Gru requires gru_params/gru_cfg.
EvalReport cross_validate(std::vector<nn::FoldModel>& models, const nn::ConvNetConfig& net_cfg,
                          const std::vector<Database>& databases, const EvalOptions& options,
                          const gru::GruParams* gru_params = nullptr,
                          const gru::GruConfig* gru_cfg = nullptr);

} // namespace qrs::eval
