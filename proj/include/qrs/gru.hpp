#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qrs/nn_core.hpp"

namespace qrs::gru {

struct GruConfig {
    int hidden_layers = 1; // 1 or 2
    int seq_len_s = 1;     // window length in seconds (100 Hz streams)
    int hidden_size = 32;
    double threshold = 0.5;

    int seq_len_samples() const { return seq_len_s * 100; }
    int in_dim(int layer) const { return layer == 0 ? 1 : hidden_size; }
    void validate() const;
};

struct GruParams {
    nn::FlatParams theta; // l{i}.{wz,uz,bz,wr,ur,br,wh,uh,bh}, head.w, head.b
};

GruParams init_params(const GruConfig& cfg, uint64_t seed);

// One gate step:
//   z = sigmoid(Wz x + Uz h + bz), r = sigmoid(Wr x + Ur h + br)
//   g = tanh(Wh x + Uh (r . h) + bh), h' = (1 - z) . h + z . g
std::vector<double> gru_cell(const GruParams& params, const GruConfig& cfg, int layer,
                             std::span<const double> x, std::span<const double> h_prev);

// Per-timestep QRS probability over the whole stream. The stream is chopped
// into consecutive seq_len windows (final short window processed as-is) and
// the hidden state resets to zero at every window boundary.
std::vector<double> forward_stream(const GruParams& params, const GruConfig& cfg,
                                   std::span<const uint8_t> bits);

// forward_stream then strict threshold.
std::vector<uint8_t> repair_stream(const GruParams& params, const GruConfig& cfg,
                                   std::span<const uint8_t> bits);

struct StreamPair {
    std::vector<uint8_t> input;  // model prediction stream
    std::vector<uint8_t> target; // label stream
};

struct GruTrainResult {
    GruParams params;
    nn::TrainHistory history;
};

// Analytic gradient of the mean per-timestep BCE of forward_stream against
// a target stream; the counterpart the finite-difference checks probe.
std::vector<double> stream_gradient(const GruParams& params, const GruConfig& cfg,
                                    std::span<const uint8_t> input,
                                    std::span<const uint8_t> target,
                                    double* loss_out = nullptr);

// Paper-stated GRU schedule: smaller LR, longer epoch budget.
nn::TrainConfig default_gru_train_config();

// BPTT training with the same plateau/early-stop semantics as the convnet
// trainer. Windows are split 80/20 train/validation (seeded).
GruTrainResult train_gru(const std::vector<StreamPair>& streams, const GruConfig& cfg,
                         const nn::TrainConfig& tc);

} // namespace qrs::gru
