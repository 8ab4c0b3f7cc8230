#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qrs/nn_core.hpp"
#include "qrs/preprocess.hpp"
#include "qrs/record.hpp"

namespace qrs::nn {

enum class PadMode { Zero, Circular }; // Circular exists for shift-covariance tests

struct ConvNetConfig {
    int depth = 2; // conv(+BN+ReLU) layers before the scoring layer
    int channels = 24;
    int kernel = 5;
    double threshold = 0.5;
    PadMode padding = PadMode::Zero;

    void validate() const;
    int in_channels(int layer) const { return layer == 0 ? 1 : channels; }
};

// Per-layer batch-norm running statistics (not trainable, not in FlatParams).
struct BnStats {
    std::vector<double> mean, var;
};

struct ModelParams {
    FlatParams theta;         // conv{i}.w/.b, bn{i}.gamma/.beta, score.w/.b
    std::vector<BnStats> bn;  // one per conv layer
};

ModelParams init_params(const ConvNetConfig& cfg, uint64_t seed);

struct SegmentBatch {
    int n = 0;
    int len = 0;
    std::vector<double> x;     // n*len, single-channel input
    std::vector<uint8_t> y;    // n*len labels
    std::vector<uint8_t> mask; // n*len, 1 = sample counts toward the loss

    static SegmentBatch from_segments(std::span<const pre::Segment* const> segments);
};

// Activations retained by the forward pass for backprop.
struct ForwardCache {
    std::vector<std::vector<double>> inputs; // depth+1 entries; inputs[l] feeds conv l
    std::vector<std::vector<double>> xhat;   // normalized conv outputs per layer
    std::vector<std::vector<double>> mu;     // batch mean per layer [channels]
    std::vector<std::vector<double>> inv_s;  // 1/sqrt(var+eps) per layer [channels]
    std::vector<double> logits;              // n*len pre-sigmoid scores
};

// Per-layer pipeline: same-padded conv -> BN -> ReLU; then a 1x1 scoring conv
// and sigmoid. Output length equals input length for every depth.
// Train mode normalizes with batch statistics (running stats are only touched
// when update_running is set); infer mode is a pure function of the inputs.
std::vector<double> forward_batch(ModelParams& params, const ConvNetConfig& cfg,
                                  const SegmentBatch& batch, Mode mode,
                                  bool update_running = false, ForwardCache* cache = nullptr);

// Pre-sigmoid scores, same contract as forward_batch.
std::vector<double> forward_raw(ModelParams& params, const ConvNetConfig& cfg,
                                const SegmentBatch& batch, Mode mode);

// Single-segment convenience wrapper.
std::vector<double> forward(ModelParams& params, const ConvNetConfig& cfg,
                            std::span<const double> segment, Mode mode);

// Exact reverse-mode gradient of bce_loss(forward(train)) w.r.t. theta.data.
// Running statistics are only refreshed when update_running is set.
std::vector<double> backward(ModelParams& params, const ConvNetConfig& cfg,
                             const SegmentBatch& batch, double* loss_out = nullptr,
                             bool update_running = false);

struct SubjectSegments {
    std::string subject;
    std::vector<pre::Segment> segments; // values already z-scored
};

struct FoldModel {
    ModelParams params;
    TrainHistory history;
    std::vector<std::string> val_subjects;
};

// Subject-wise k-fold training with Adam, plateau LR scheduling and early
// stopping; returns the best-validation-loss parameters per fold.
std::vector<FoldModel> train(const std::vector<SubjectSegments>& dataset, const TrainConfig& tc,
                             const ConvNetConfig& nc);

// Record-level inference: segmentize, z-score, forward in infer mode,
// threshold, OR-aggregate back onto the record timeline.
PredictionStream predict_stream(ModelParams& params, const ConvNetConfig& cfg,
                                const EcgRecord& record);

// Segments of one record, z-scored, labels attached; subject = record name.
SubjectSegments record_to_subject(const EcgRecord& record,
                                  int label_halfwidth = pre::kLabelHalfWidth);

} // namespace qrs::nn
